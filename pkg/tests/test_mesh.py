import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insfem.errors import InvalidArgument, InvertedElement, UnsupportedDegree, UnsupportedElement
from insfem.mesh import (
    RefElement,
    build_conical_diffuser_mesh,
    build_interval_mesh,
    build_structured_quad_mesh,
    build_structured_tri_mesh,
    map_element,
    map_mesh,
    quadrature_for,
    shape_eval,
)

ELEMENTS = ["EDGE2", "EDGE3", "TRI3", "TRI6", "QUAD4", "QUAD9"]


def test_interval_mesh_examples():
    m = build_interval_mesh(1, 0.0, 1.0, 1)
    assert m.n_nodes == 2 and m.elem_type == "EDGE2"
    np.testing.assert_allclose(np.sort(m.nodes[:, 0]), [0.0, 1.0])
    m = build_interval_mesh(2, 0.0, 1.0, 2)
    np.testing.assert_allclose(np.sort(m.nodes[:, 0]), [0, 0.25, 0.5, 0.75, 1.0])
    m = build_interval_mesh(4, 0.0, 1.0, 1)
    assert m.side_sets["right"].tolist() == [[3, 1]]


@pytest.mark.parametrize("args", [(0, 0.0, 1.0), (2, 1.0, 1.0), (2, 1.0, 0.0)])
def test_interval_mesh_rejects_bad_input(args):
    with pytest.raises(InvalidArgument):
        build_interval_mesh(*args)


def test_quad_mesh_counts():
    m = build_structured_quad_mesh(1, 1)
    assert (m.n_nodes, m.n_elements, m.elem_type) == (4, 1, "QUAD4")
    assert build_structured_quad_mesh(2, 2, order=2).n_nodes == 25
    m = build_structured_quad_mesh(128, 128)
    np.testing.assert_allclose(m.element_sizes(), math.sqrt(2) / 128)
    assert set(m.side_sets) >= {"left", "right", "bottom", "top"}
    with pytest.raises(InvalidArgument):
        build_structured_quad_mesh(2, 2, domain=(0.0, 0.0, 0.0, 1.0))


def test_tri_mesh_counts_and_area():
    m = build_structured_tri_mesh(1, 1)
    assert (m.n_elements, m.n_nodes, m.elem_type) == (2, 4, "TRI3")
    m = build_structured_tri_mesh(1, 1, order=2)
    assert (m.n_elements, m.n_nodes, m.elem_type) == (2, 9, "TRI6")
    m = build_structured_tri_mesh(3, 5, domain=(0, 2, 1, 2), order=2)
    rule = quadrature_for("TRI", 2)
    area = sum(np.sum(map_element(m, e, rule).detJ * rule.weights) for e in range(m.n_elements))
    assert area == pytest.approx(2.0, rel=1e-13)


def test_refinement_quarters_areas():
    rule = quadrature_for("QUAD", 1)
    a = map_element(build_structured_quad_mesh(3, 2, (0, 3, 0, 1)), 0, rule)
    b = map_element(build_structured_quad_mesh(6, 4, (0, 3, 0, 1)), 0, rule)
    assert np.sum(a.detJ * rule.weights) == pytest.approx(4 * np.sum(b.detJ * rule.weights), rel=1e-14)


def test_counterclockwise_orientation():
    for builder, order in itertools.product((build_structured_quad_mesh, build_structured_tri_mesh), (1, 2)):
        m = builder(3, 2, order=order)
        rule = quadrature_for(m.ref.family, 3)
        assert all(np.all(map_element(m, e, rule).detJ > 0) for e in range(m.n_elements))


def test_shape_examples():
    v, _, _ = shape_eval(RefElement.from_type("QUAD4"), np.array([[0.0, 0.0]]))
    np.testing.assert_allclose(v[0], 0.25)
    v, _, _ = shape_eval(RefElement.from_type("TRI6"), np.array([[0.0, 0.0]]))
    np.testing.assert_allclose(v[0], [1, 0, 0, 0, 0, 0], atol=1e-15)
    with pytest.raises(UnsupportedElement):
        RefElement.from_type("HEX8")


@pytest.mark.parametrize("elem", ELEMENTS)
def test_nodal_property(elem):
    ref = RefElement.from_type(elem)
    v, _, _ = shape_eval(ref, ref.node_coords)
    np.testing.assert_allclose(v, np.eye(ref.n_nodes), atol=1e-14)


@pytest.mark.parametrize("elem", ELEMENTS)
@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_partition_of_unity(elem, data):
    ref = RefElement.from_type(elem)
    a = data.draw(st.floats(0.0, 1.0))
    b = data.draw(st.floats(0.0, 1.0))
    if ref.family == "TRI":
        pt = [a * (1 - b), b]
    else:
        pt = [2 * a - 1, 2 * b - 1][: ref.dim]
    v, g, h = shape_eval(ref, np.array([pt]))
    assert v.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(g.sum(axis=1), 0.0, atol=1e-13)
    np.testing.assert_allclose(h.sum(axis=1), 0.0, atol=1e-12)


def test_quadrature_examples():
    q = quadrature_for("EDGE", 3)
    np.testing.assert_allclose(np.sort(q.points[:, 0]), [-1 / math.sqrt(3), 1 / math.sqrt(3)])
    np.testing.assert_allclose(q.weights, [1.0, 1.0])
    q = quadrature_for("QUAD", 3)
    assert len(q.weights) == 4 and q.weights.sum() == pytest.approx(4.0)
    q = quadrature_for("TRI", 1)
    np.testing.assert_allclose(q.points, [[1 / 3, 1 / 3]])
    np.testing.assert_allclose(q.weights, [0.5])
    with pytest.raises(UnsupportedDegree):
        quadrature_for("TRI", 40)


def _tri_monomial(i, j):
    # int_T x^i y^j over the unit right triangle
    return math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)


def _edge_monomial(i):
    return 0.0 if i % 2 else 2.0 / (i + 1)


@pytest.mark.parametrize("degree", range(1, 8))
@pytest.mark.parametrize("family", ["EDGE", "QUAD", "TRI"])
def test_quadrature_exactness(family, degree):
    q = quadrature_for(family, degree)
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            if family == "EDGE":
                if j:
                    continue
                got, exact = np.sum(q.weights * q.points[:, 0] ** i), _edge_monomial(i)
            elif family == "QUAD":
                got = np.sum(q.weights * q.points[:, 0] ** i * q.points[:, 1] ** j)
                exact = _edge_monomial(i) * _edge_monomial(j)
            else:
                got = np.sum(q.weights * q.points[:, 0] ** i * q.points[:, 1] ** j)
                exact = _tri_monomial(i, j)
            assert got == pytest.approx(exact, abs=1e-13)


def test_map_element_examples():
    m = build_structured_quad_mesh(1, 1, domain=(0, 0.5, 0, 0.25))
    np.testing.assert_allclose(map_element(m, 0, quadrature_for("QUAD", 3)).detJ, 0.5 * 0.25 / 4)
    m = build_structured_tri_mesh(1, 1)
    me = map_element(m, 0, quadrature_for("TRI", 3))
    np.testing.assert_allclose(me.detJ, me.detJ[0])


def _shoelace(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.15, 0.15), min_size=8, max_size=8))
def test_perturbed_quad_area(offsets):
    m = build_structured_quad_mesh(1, 1)
    m.nodes[:] = m.nodes + np.reshape(offsets, (4, 2))
    rule = quadrature_for("QUAD", 3)
    me = map_element(m, 0, rule)
    assert np.sum(me.detJ * rule.weights) == pytest.approx(_shoelace(m.nodes[m.elements[0]]), rel=1e-13)


def test_mapped_gradients_reproduce_linear_field():
    m = map_mesh(build_structured_quad_mesh(2, 2, order=2), lambda x: x + 0.05 * np.sin(3 * x[:, ::-1]))
    rule = quadrature_for("QUAD", 4)
    for e in range(m.n_elements):
        me = map_element(m, e, rule)
        X = m.nodes[m.elements[e]]
        f = 2 * X[:, 0] - 3 * X[:, 1]
        np.testing.assert_allclose(np.einsum("qad,a->qd", me.grad, f), np.tile([2.0, -3.0], (len(rule.weights), 1)),
                                   atol=1e-12)
        np.testing.assert_allclose(np.einsum("qaij,a->qij", me.hess, f), 0.0, atol=1e-10)


def test_quadratic_hessian_exact_on_affine_mesh():
    m = build_structured_tri_mesh(2, 2, domain=(0, 2, 0, 1), order=2)
    rule = quadrature_for("TRI", 3)
    for e in range(m.n_elements):
        me = map_element(m, e, rule)
        X = m.nodes[m.elements[e]]
        H = np.einsum("qaij,a->qij", me.hess, X[:, 0] ** 2 + X[:, 0] * X[:, 1])
        np.testing.assert_allclose(H, np.tile([[2.0, 1.0], [1.0, 0.0]], (len(rule.weights), 1, 1)), atol=1e-11)


def test_inverted_element_raises():
    m = build_structured_quad_mesh(1, 1)
    m.nodes[:, 0] *= -1.0
    with pytest.raises(InvertedElement):
        map_element(m, 0, quadrature_for("QUAD", 2))


def test_conical_diffuser_geometry():
    m = build_conical_diffuser_mesh(4, 4, 8, family="TRI", order=2)
    assert set(m.side_sets) == {"axis", "wall", "inlet", "outlet"}
    assert m.nodes[:, 0].min() == 0.0
    inlet = m.nodes[m.side_nodes("inlet")]
    np.testing.assert_allclose(inlet[:, 1], 0.0)
    assert inlet[:, 0].max() == pytest.approx(0.5)
    outlet = m.nodes[m.side_nodes("outlet")]
    np.testing.assert_allclose(outlet[:, 1], 4.0)
    assert outlet[:, 0].max() == pytest.approx(1.0)
    wall = m.nodes[m.side_nodes("wall")]
    cone = wall[wall[:, 1] <= 1.0]
    np.testing.assert_allclose(cone[:, 0], 0.5 + 0.5 * cone[:, 1], atol=1e-14)
