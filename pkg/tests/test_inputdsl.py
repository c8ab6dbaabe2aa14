import math
import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import insfem
from insfem.errors import EvaluationError, ParseError
from insfem.inputdsl.builder import build_simulation, load_simulation
from insfem.inputdsl.expression import eval_expression, parse_expression
from insfem.inputdsl.hit import Section, parse_file, parse_hit, render, substitute_dbe
from insfem.kernels import MomentumSUPG, ViscousLaplace
from insfem.presets import cavity_input

DATA = Path(insfem.__file__).parent / "data"
LISTINGS = sorted(DATA.glob("listing_*.i"))
INLET = "sqrt((x-2)^2 * (x+2)^2 * (y-2)^2 * (y+2)^2) / 16"


def all_listings():
    return "\n".join(p.read_text() for p in LISTINGS)


# dollar-bracket substitution


def test_dbe_substitutes_material_values():
    text = substitute_dbe(all_listings())
    assert "prop_values = '4e-3  1'" not in text
    assert "prop_values = '1  4e-3'" in text
    assert load_simulation(all_listings()).materials == {"rho": 1.0, "mu": 4e-3}


def test_dbe_without_references_is_unchanged():
    text = (DATA / "listing_kernels.i").read_text()
    assert substitute_dbe(text) == text


def test_dbe_is_idempotent():
    once = substitute_dbe(all_listings())
    assert substitute_dbe(once) == once


def test_dbe_undefined_name():
    with pytest.raises(ParseError, match="'nu'") as exc:
        substitute_dbe("mu = 1\n[A]\n  k = ${nu}\n[]\n")
    assert exc.value.line == 3


def test_dbe_is_single_pass():
    text = "a = ${b}\nb = 2\n[S]\n  k = ${a}\n[]\n"
    assert "k = ${b}" in substitute_dbe(text)


# hierarchical parser


@pytest.mark.parametrize("path", LISTINGS, ids=lambda p: p.stem)
def test_listings_parse_verbatim(path):
    # the materials listing refers to variables defined in the global one, so substitution runs on the whole set
    assert parse_hit(path.read_text(), str(path)).children
    assert parse_hit(substitute_dbe(all_listings())).children


def test_kernels_listing_structure():
    tree = parse_file(DATA / "listing_kernels.i")
    ks = tree["Kernels"]
    assert list(ks.children) == ["mass", "x_time", "x_momentum_space"]
    assert ks["mass"].get("type") == "INSMass"
    assert ks["x_momentum_space"].get_int("component") == 0


def test_gravity_is_a_list_of_zeros():
    tree = parse_hit("gravity = '0 0 0'")
    assert tree.get_floats("gravity") == [0.0, 0.0, 0.0]


def test_empty_input_gives_empty_tree():
    assert parse_hit("") == Section("")
    assert parse_hit("# only a comment\n\n") == Section("")


def test_executioner_listing_values():
    ex = build_simulation(parse_file(DATA / "listing_executioner.i")).executioner
    assert (ex.adaptive.growth_factor, ex.adaptive.cutback_factor, ex.adaptive.optimal_iterations) == (1.2, 0.4, 5)
    assert ex.dt0 == 0.5 and ex.dtmin == 5e-4 and ex.num_steps == 100
    assert ex.ss_check and ex.ss_check_tol == 1e-10
    assert ex.krylov.preconditioner == "lu"


@pytest.mark.parametrize(
    "text,line,pattern",
    [
        ("[A]\n  k = 1\n", 1, "never closed"),
        ("[A]\n[]\n[]\n", 3, "without a matching open"),
        ("[A]\n  k = 1\n  k = 2\n[]\n", 3, "duplicate parameter"),
        ("[A]\n[]\n[A]\n[]\n", 3, "duplicate section"),
        ("[A]\n  k = 1 2\n[]\n", 2, "unexpected token"),
        ("[A]\n  k = 'open\n[]\n", 2, "unterminated"),
        ("[A]\n  stray\n[]\n", 2, "expected 'key = value'"),
    ],
)
def test_parse_errors_carry_location(text, line, pattern):
    with pytest.raises(ParseError, match=pattern) as exc:
        parse_hit(text, "in.i")
    assert exc.value.line == line
    assert str(exc.value).startswith(f"in.i:{line}:")


def test_legacy_and_modern_markers_mix():
    tree = parse_hit("[A]\n  [./b]\n    x = 1\n  []\n[../]\n")
    assert tree["A/b"].get("x") == "1"


# round trip through the canonical renderer

_names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True)
_values = st.text(st.characters(blacklist_categories=("Cc", "Cs", "Zl", "Zp")), max_size=12).filter(
    lambda v: not ("'" in v and '"' in v))


def _section(children):
    return st.builds(
        lambda name, params, kids: Section(name, params, {k.name: k for k in kids}),
        _names,
        st.dictionaries(_names, _values, max_size=4),
        st.lists(children, max_size=3, unique_by=lambda s: s.name),
    )


_trees = st.recursive(st.builds(lambda n, p: Section(n, p), _names, st.dictionaries(_names, _values, max_size=4)),
                      _section, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(_names, _values, max_size=3), st.lists(_trees, max_size=4, unique_by=lambda s: s.name))
def test_render_parse_round_trip(top, sections):
    tree = Section("", dict(top), {s.name: s for s in sections})
    assert parse_hit(render(tree)) == tree


# expressions


def test_inlet_function_examples():
    f = parse_expression(INLET)
    assert f(0.0, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert f(2.0, 0.3) == 0.0
    assert eval_expression("4*x*(1-x)", x=0.5) == 1.0


def test_precedence_and_associativity():
    assert eval_expression("2^3^2") == 512.0
    assert eval_expression("-2^2") == -4.0
    assert eval_expression("1 - 2 - 3") == -4.0
    assert eval_expression("8 / 4 / 2") == 1.0
    assert eval_expression("2 + 3 * 4") == 14.0


def test_constants_and_coordinates():
    f = parse_expression("mu * (x + y + z + t) + pi", {"mu": 2.0})
    assert f(1, 2, 3, 4) == pytest.approx(20 + math.pi)


def test_vectorized_evaluation():
    f = parse_expression("x * y")
    np.testing.assert_array_equal(f(np.arange(3.0), 2.0), [0.0, 2.0, 4.0])


@pytest.mark.parametrize("src", ["sqrt(x - 1)", "log(x)", "1 / x", "(-1)^0.5"])
def test_domain_errors(src):
    with pytest.raises(EvaluationError):
        eval_expression(src, x=0.0)


@pytest.mark.parametrize("src", ["foo + 1", "sin(1, 2)", "1 +", "(1", "x y", "bogus(1)", "1 $ 2"])
def test_syntax_errors(src):
    with pytest.raises(ParseError):
        parse_expression(src)


_LEAVES = st.one_of(st.sampled_from(["x", "y", "z", "t"]), st.floats(-3, 3, allow_nan=False).map(lambda v: f"{v!r}"))
_UNARY = {"sin": "math.sin", "cos": "math.cos", "tanh": "math.tanh", "abs": "abs", "atan": "math.atan"}


def _combine(sub):
    pair = st.tuples(sub, sub)
    return st.one_of(
        pair.map(lambda p: (f"({p[0][0]} + {p[1][0]})", f"({p[0][1]} + {p[1][1]})")),
        pair.map(lambda p: (f"({p[0][0]} - {p[1][0]})", f"({p[0][1]} - {p[1][1]})")),
        pair.map(lambda p: (f"({p[0][0]} * {p[1][0]})", f"({p[0][1]} * {p[1][1]})")),
        pair.map(lambda p: (f"({p[0][0]}) / (1 + ({p[1][0]})^2)", f"({p[0][1]}) / (1 + ({p[1][1]})**2)")),
        pair.map(lambda p: (f"max({p[0][0]}, {p[1][0]})", f"max({p[0][1]}, {p[1][1]})")),
        st.tuples(st.sampled_from(sorted(_UNARY)), sub).map(
            lambda p: (f"{p[0]}({p[1][0]})", f"{_UNARY[p[0]]}({p[1][1]})")),
        st.tuples(sub, st.integers(0, 3)).map(lambda p: (f"({p[0][0]})^{p[1]}", f"({p[0][1]})**{p[1]}")),
        sub.map(lambda s: (f"-({s[0]})", f"-({s[1]})")),
    )


_EXPRS = st.recursive(_LEAVES.map(lambda s: (s, s)), _combine, max_leaves=10)
_COORD = st.floats(-2, 2, allow_nan=False)


@settings(max_examples=1000, deadline=None)
@given(_EXPRS, _COORD, _COORD, _COORD, _COORD)
def test_matches_reference_evaluator(pair, x, y, z, t):
    src, ref = pair
    try:
        expected = eval(ref, {"math": math}, {"x": x, "y": y, "z": z, "t": t})
    except OverflowError:
        return
    got = eval_expression(src, x, y, z, t)
    assert got == pytest.approx(expected, rel=1e-13, abs=1e-13 * (1 + abs(expected)))


# simulation construction


def test_global_params_reach_every_object():
    spec = load_simulation(all_listings())
    obj = {o.name: o for o in spec.kernel_specs}["x_momentum_space"]
    assert {k: obj.params[k] for k in "uvwp"} == {"u": "vel_x", "v": "vel_y", "w": "vel_z", "p": "p"}
    assert obj.local == {"type": "INSMomentumLaplaceForm", "variable": "vel_x", "component": "0"}


def test_local_parameter_beats_global():
    text = cavity_input(n=2).replace("    type = INSMomentumLaplaceForm\n    variable = vel_x\n",
                                     "    type = INSMomentumLaplaceForm\n    variable = vel_x\n    supg = false\n", 1)
    spec = load_simulation(text)
    supg = [k.component for k in spec.kernels if isinstance(k, MomentumSUPG)]
    assert supg == [1]


def test_component_zero_is_first_momentum_equation():
    spec = load_simulation(cavity_input(n=2))
    lap = [k for k in spec.kernels if isinstance(k, ViscousLaplace)]
    assert [(k.component, k.variable) for k in lap] == [(0, "vel_x"), (1, "vel_y")]
    assert spec.config.mu == pytest.approx(1e-3) and spec.config.supg and spec.config.pspg


def test_unknown_type_lists_valid_types():
    text = all_listings().replace("type = INSMass\n", "type = INSMas\n")
    with pytest.raises(ParseError, match="valid types:.*INSMass,") as exc:
        load_simulation(text, "x.i")
    assert exc.value.line is not None


def test_missing_required_parameter_names_object():
    text = all_listings().replace("    component = 0\n", "")
    with pytest.raises(ParseError, match="x_momentum_space.*'component'"):
        load_simulation(text)


def test_unknown_section():
    with pytest.raises(ParseError, match=r"unknown section \[Kernel\]"):
        load_simulation("[Kernel]\n[]\n")


def test_cross_check_undeclared_variable_and_boundary():
    base = cavity_input(n=2)
    with pytest.raises(ParseError, match="not declared"):
        load_simulation(base.replace("variable = vel_y\n    boundary = 'bottom", "variable = vel_z\n    boundary = 'bottom", 1))
    bad = re.sub(r"boundary = 'bottom right left'", "boundary = 'bottom right lft'", base, count=1)
    with pytest.raises(ParseError, match="unknown boundary 'lft'"):
        load_simulation(bad)


def test_listings_build_without_mesh():
    spec = load_simulation(all_listings())
    assert spec.mesh is None and spec.functions["inlet_func"](0.0, 0.0) == pytest.approx(1.0)
    assert [o.type for o in spec.kernel_specs] == ["INSMass", "INSMomentumTimeDerivative", "INSMomentumLaplaceForm"]
