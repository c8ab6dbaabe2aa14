import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insfem.errors import ConfigurationError, InvalidArgument
from insfem.fem import RZ, XY, DirichletBC, PinBC, System, Variable
from insfem.kernels import (
    Mass,
    MomentumConvection,
    MomentumLSIC,
    MomentumSUPG,
    MomentumTime,
    PSPG,
    PressureGradient,
    ViscousLaplace,
    ViscousTraction,
    WeakFormConfig,
    ins_kernels,
    strong_residual,
    tau,
)
from insfem.mesh import build_structured_quad_mesh, build_structured_tri_mesh, map_mesh
from insfem.timeloop import steady_solve

VEL = ["vel_x", "vel_y"]


def ins_vars(order=1):
    return [Variable("vel_x", order, "velocity"), Variable("vel_y", order, "velocity"), Variable("p", 1, "pressure")]


def unit_system(kernels, order=1, coord=XY, mesh=None):
    mesh = mesh or build_structured_quad_mesh(1, 1, order=order)
    return System(mesh, ins_vars(order), kernels=kernels, coord=coord)


def field(s, y, name):
    return s.dofmap.field(y, name)


# stabilization parameter


def test_tau_examples():
    assert tau(math.inf, 1.0, 1.0, 0.0) == pytest.approx(0.5)
    assert tau(math.inf, 0.0, 1.0, 1.0) == pytest.approx(1.0 / 12.0)
    assert tau(0.5, 1.0, 0.1, 1e-3) == pytest.approx(1.0 / math.sqrt(16 + 400 + 1.44), rel=1e-12)
    with pytest.raises(InvalidArgument):
        tau(1.0, 1.0, 0.0, 1.0)


@settings(max_examples=50)
@given(st.floats(1e-3, 10), st.floats(0, 10), st.floats(1e-3, 1), st.floats(1e-4, 1), st.floats(0.01, 1))
def test_tau_monotone_and_linear_in_alpha(dt, speed, h, nu, alpha):
    base = tau(dt, speed, h, nu)
    assert tau(dt, speed * 1.5 + 0.1, h, nu) <= base
    assert tau(dt, speed, h, nu * 1.5) <= base
    assert tau(dt / 1.5, speed, h, nu) <= base
    assert tau(dt, speed, h, nu, alpha) == pytest.approx(alpha * base, rel=1e-13)


def test_config_validation():
    for bad in (dict(rho=0.0), dict(mu=-1.0), dict(alpha=1.5), dict(form="rotation"), dict(coord="ZR")):
        with pytest.raises(InvalidArgument):
            WeakFormConfig(**bad)
    assert WeakFormConfig(mu=3.0, rho=2.0).lsic_coefficient == pytest.approx(1.0)


# individual kernels on a unit QUAD4


def test_mass_kernel_examples():
    cfg = WeakFormConfig()
    s = unit_system([Mass(cfg)])
    y = s.dofmap.interpolant({"vel_x": lambda x: x[:, 0]})
    np.testing.assert_allclose(field(s, s.residual(y), "p"), -0.25)
    y = s.dofmap.interpolant({"vel_x": lambda x: x[:, 1]})
    np.testing.assert_allclose(field(s, s.residual(y), "p"), 0.0, atol=1e-15)


def test_mass_kernel_rz_divergence():
    # u_r = r gives div u = 2, so the residual is -2 int psi r dr dz
    cfg = WeakFormConfig(coord=RZ)
    s = unit_system([Mass(cfg)], coord=RZ)
    y = s.dofmap.interpolant({"vel_x": lambda x: x[:, 0]})
    assert field(s, s.residual(y), "p").sum() == pytest.approx(-2.0 * 0.5)


def test_momentum_time_kernel():
    cfg = WeakFormConfig(rho=2.0, transient=True)
    s = unit_system([MomentumTime(cfg, 0)])
    y = s.dofmap.interpolant({"vel_x": 1.0})
    y_old = np.zeros_like(y)
    np.testing.assert_allclose(field(s, s.residual(y, y_old, dt=0.1), "vel_x"), 5.0)
    np.testing.assert_allclose(s.residual(y_old, y_old, dt=0.1), 0.0)
    J = s.jacobian(y, y_old, dt=0.1).toarray()
    np.testing.assert_allclose(np.diag(J)[:4], 2 * 10 / 9)


def test_transient_kernel_rejected_by_steady_solve():
    cfg = WeakFormConfig(transient=True)
    ks, _ = ins_kernels(cfg)
    with pytest.raises(ConfigurationError):
        steady_solve(unit_system(ks))


def test_convection_kernel():
    cfg = WeakFormConfig(rho=3.0)
    s = unit_system([MomentumConvection(cfg, 0)])
    y = s.dofmap.interpolant({"vel_x": 1.0})
    np.testing.assert_allclose(s.residual(y), 0.0, atol=1e-15)
    # u = (1, x): u . grad u2 = 1
    s2 = unit_system([MomentumConvection(cfg, 1)])
    y = s2.dofmap.interpolant({"vel_x": 1.0, "vel_y": lambda x: x[:, 0]})
    np.testing.assert_allclose(field(s2, s2.residual(y), "vel_y"), 3.0 / 4.0)
    np.testing.assert_allclose(s2.residual(np.zeros_like(y)), 0.0)


def test_viscous_laplace_kernel():
    cfg = WeakFormConfig(mu=1.0)
    s = unit_system([ViscousLaplace(cfg, 0)])
    y = s.dofmap.interpolant({"vel_x": lambda x: x[:, 0]})
    node = s.mesh.find_node((0.0, 0.0))
    assert s.residual(y)[s.dofmap.node_dofs["vel_x"][node]] == pytest.approx(-0.5)
    np.testing.assert_allclose(s.residual(s.dofmap.interpolant({"vel_x": 2.0})), 0.0, atol=1e-15)
    K = s.jacobian(y).toarray()
    np.testing.assert_allclose(K, K.T, atol=1e-13)
    assert np.count_nonzero(K[:4, 4:8]) == 0


def test_traction_minus_laplace_is_transpose_term():
    mesh = build_structured_quad_mesh(3, 3)
    cfg = WeakFormConfig(mu=0.7)
    lap = System(mesh, ins_vars(), kernels=[ViscousLaplace(cfg, k) for k in range(2)])
    tra = System(mesh, ins_vars(), kernels=[ViscousTraction(cfg, k) for k in range(2)])
    y = lap.dofmap.interpolant({"vel_x": lambda x: x[:, 1], "vel_y": lambda x: x[:, 0]})
    diff = tra.residual(y) - lap.residual(y)
    # grad u^T : grad(phi e_k) for u=(y,x) equals the Laplace residual itself
    np.testing.assert_allclose(diff, lap.residual(y), atol=1e-14)
    y = lap.dofmap.interpolant({"vel_x": lambda x: -x[:, 1], "vel_y": lambda x: x[:, 0]})
    np.testing.assert_allclose(tra.residual(y), 0.0, atol=1e-14)


def test_pressure_kernel():
    cfg = WeakFormConfig(integrate_p_by_parts=True)
    s = unit_system([PressureGradient(cfg, 0)])
    y = s.dofmap.interpolant({"p": 1.0})
    node = s.mesh.find_node((0.0, 0.0))
    assert s.residual(y)[s.dofmap.node_dofs["vel_x"][node]] == pytest.approx(0.5)
    s = unit_system([PressureGradient(WeakFormConfig(integrate_p_by_parts=False), 0)])
    np.testing.assert_allclose(s.residual(y), 0.0, atol=1e-15)


def test_pressure_kernel_rz_hoop_term():
    # by parts in RZ: -p (d phi/dr + phi/r) r; summed over nodes only -p phi survives
    mesh = build_structured_quad_mesh(1, 1, domain=(1.0, 2.0, 0.0, 1.0))
    out = []
    for coord in (XY, RZ):
        s = System(mesh, ins_vars(), kernels=[PressureGradient(WeakFormConfig(coord=coord), 0)], coord=coord)
        y = s.dofmap.interpolant({"p": 1.0})
        out.append(field(s, s.residual(y), "vel_x").sum())
    assert out[0] == pytest.approx(0.0, abs=1e-14)
    assert out[1] == pytest.approx(-1.0)


def test_strong_residual_rest_and_laplacian():
    mesh = build_structured_quad_mesh(2, 2, order=2)
    cfg = WeakFormConfig(mu=1.0, convective=False)
    s = System(mesh, ins_vars(2))
    y = s.dofmap.interpolant({"p": 3.0})
    q = next(s._contexts(y, y, 0.0, math.inf, 1.0, None))[1]()
    np.testing.assert_allclose(strong_residual(q, cfg)[0], 0.0, atol=1e-13)
    y = s.dofmap.interpolant({"vel_x": lambda x: x[:, 0] ** 2})
    q = next(s._contexts(y, y, 0.0, math.inf, 1.0, None))[1]()
    np.testing.assert_allclose(strong_residual(q, cfg)[0][..., 0], -2.0, atol=1e-11)


def test_strong_residual_rz_vector_laplacian():
    mesh = build_structured_quad_mesh(2, 2, domain=(0.5, 1.5, 0, 1), order=2)
    cfg = WeakFormConfig(mu=1.0, convective=False, coord=RZ)
    s = System(mesh, ins_vars(2), coord=RZ)
    y = s.dofmap.interpolant({"vel_x": lambda x: x[:, 0]})
    q = next(s._contexts(y, y, 0.0, math.inf, 1.0, None))[1]()
    R = strong_residual(q, cfg)[0]
    # Lap u_r - u_r/r^2 = 0 + 1/r - 1/r = 0 for u_r = r
    np.testing.assert_allclose(R[..., 0], 0.0, atol=1e-11)


def test_supg_and_pspg_vanish_at_rest():
    cfg = WeakFormConfig(supg=True, pspg=True)
    ks = [MomentumSUPG(cfg, 0), MomentumSUPG(cfg, 1), PSPG(cfg)]
    s = System(build_structured_quad_mesh(3, 3), ins_vars(), kernels=ks)
    np.testing.assert_allclose(s.residual(s.dofmap.interpolant({"p": 2.0})), 0.0, atol=1e-14)


def test_lsic_kernel():
    cfg = WeakFormConfig(mu=1.5, lsic=True)
    s = unit_system([MomentumLSIC(cfg, k) for k in range(2)])
    np.testing.assert_allclose(s.residual(s.dofmap.interpolant({"vel_x": lambda x: x[:, 1]})), 0.0, atol=1e-15)
    y = s.dofmap.interpolant({"vel_x": lambda x: x[:, 0]})
    # tau_L = 2 nu / 3 = 1 so the residual is int d(phi)/dx, i.e. -1/2 on the left nodes
    r = field(s, s.residual(y), "vel_x")
    np.testing.assert_allclose(np.sort(r), [-0.5, -0.5, 0.5, 0.5], atol=1e-14)
    K = s.jacobian(y).toarray()
    assert np.allclose(K, K.T, atol=1e-14) and np.linalg.eigvalsh(K).min() > -1e-13


def test_stokes_traction_matrix_symmetric():
    cfg = WeakFormConfig(form="traction", convective=False, mu=0.4)
    ks, _ = ins_kernels(cfg)
    s = System(build_structured_tri_mesh(3, 3, order=2), ins_vars(2), kernels=ks)
    K = s.jacobian(np.zeros(s.n_dofs), constrain=False).toarray()
    assert np.abs(K - K.T).max() <= 1e-12 * np.abs(K).max()


def test_pspg_removes_checkerboard_modes():
    cfg = WeakFormConfig(convective=False, pspg=True)
    ks, _ = ins_kernels(cfg)
    walls = ("top", "bottom", "left", "right")
    cs = [DirichletBC("vel_x", walls, 0.0), DirichletBC("vel_y", walls, 0.0)]
    s = System(build_structured_quad_mesh(4, 4), ins_vars(), kernels=ks, constraints=cs)
    sv = np.linalg.svd(s.jacobian(np.zeros(s.n_dofs)).toarray(), compute_uv=False)
    assert sv[-1] < 1e-12 * sv[0]
    assert sv[-2] > 1e-6 * sv[0]
    cs.append(PinBC("p", point=(0.0, 0.0)))
    s = System(build_structured_quad_mesh(4, 4), ins_vars(), kernels=ks, constraints=cs)
    assert np.linalg.matrix_rank(s.jacobian(np.zeros(s.n_dofs)).toarray()) == s.n_dofs


def test_noslip_outflow_zero_state():
    cfg = WeakFormConfig()
    _, bks = ins_kernels(cfg, outflow=["right"])
    s = System(build_structured_quad_mesh(2, 2), ins_vars(), boundary_kernels=bks)
    np.testing.assert_allclose(s.residual(np.zeros(s.n_dofs)), 0.0)
    # fully developed channel profile with zero pressure: du/dn = 0 on the exit
    y = s.dofmap.interpolant({"vel_x": lambda x: x[:, 1] * (1 - x[:, 1])})
    np.testing.assert_allclose(s.residual(y), 0.0, atol=1e-14)


# Jacobian property suite: every kernel, both forms, both coordinate systems


def _fd_error(s, y, kw, eps=1e-7):
    v = np.random.default_rng(11).normal(size=s.n_dofs)
    Jv = s.jacobian(y, tau_state=y, **kw).to_scipy() @ v
    F0 = s.residual(y, tau_state=y, **kw)
    fd = (s.residual(y + eps * v, tau_state=y, **kw) - F0) / eps
    return np.linalg.norm(Jv - fd) / max(np.linalg.norm(Jv), 1e-300)


def _mesh(elem):
    order = 2 if elem[-1] in "69" else 1
    build = build_structured_quad_mesh if elem.startswith("QUAD") else build_structured_tri_mesh
    m = build(3, 3, (0.2, 1.3, 0.0, 1.0), order)
    return map_mesh(m, lambda x: x + 0.04 * np.sin(3 * x[:, ::-1]))


def _force(x, t):
    return np.stack([np.sin(x[:, 0]) + t, x[:, 1] ** 2], axis=-1)


KERNEL_CASES = [
    pytest.param(elem, coord, form, id=f"{elem}-{coord}-{form}")
    for elem, coord, form in itertools.product(["QUAD4", "QUAD9", "TRI3", "TRI6"], [XY, RZ], ["laplace", "traction"])
]


@pytest.mark.parametrize("elem,coord,form", KERNEL_CASES)
def test_jacobian_matches_finite_differences(elem, coord, form):
    mesh = _mesh(elem)
    rng = np.random.default_rng(7)
    for transient, by_parts in ((False, True), (True, False)):
        cfg = WeakFormConfig(form=form, coord=coord, integrate_p_by_parts=by_parts, supg=True, pspg=True, lsic=True,
                             transient=transient, rho=1.3, mu=0.7, body_force=_force)
        ks, bks = ins_kernels(cfg, outflow=["right", "top"])
        kw = dict(y_old=None, t=0.3, dt=0.1, theta=0.5) if transient else {}
        for k in ks + bks:
            vol, bnd = ([k], []) if k in ks else ([], [k])
            s = System(mesh, ins_vars(mesh.order), kernels=vol, boundary_kernels=bnd, coord=coord)
            y = rng.normal(size=s.n_dofs)
            if transient:
                kw["y_old"] = rng.normal(size=s.n_dofs)
            err = _fd_error(s, y, kw)
            assert err <= 1e-5, f"{type(k).__name__} component {getattr(k, 'component', '-')}: {err:.2e}"
