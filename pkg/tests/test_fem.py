import numpy as np
import pytest
import scipy.sparse as sp

from rmmfit.bvp import (ModeSolver, assemble, assemble_system, continuum_discretization, default_kappa,
                        heterogeneous_discretization, integrate_density, state_at_quadrature, total_energy)
from rmmfit.fem.assembly import (AssembledSystem, assemble_boundary_penalty, build_boundary_operator,
                                 interpolate, quadratic_energy)
from rmmfit.fem.basis import (NED_EDGES, edge_points, gauss_quad, lagrange_basis, nedelec_basis,
                              nedelec_dofs, triangle_rule_deg4)
from rmmfit.fem.constraints import apply_dirichlet, apply_periodic, fix, slave
from rmmfit.fem.dofs import build_dofmap
from rmmfit.fem.solver import SolverError, SPDFactor, solve_spd
from rmmfit.geometry import build_homogeneous_mesh, periodic_pairs
from rmmfit.loading import DeformationMode, canonical_modes, random_modes
from rmmfit.materials import ConstraintError, CubicModuli
from rmmfit.models import (CosseratParams, FieldState, HeterogeneousParams, LinearElasticParams,
                           MicromorphicIsoParams, MicromorphicSimpleParams, RMMParams, get_model)

MICRO = CubicModuli(10.55, 26.32, 8.22)


@pytest.fixture(scope="module")
def model_cases(macro):
    """(model name, micro-field kind, parameters) for every continuum model."""
    rmm = RMMParams(MICRO, macro, 1.93836)
    return [
        ("le", None, LinearElasticParams(macro)),
        ("rmm", "nedelec", rmm),
        ("rmm", "lagrange", rmm),
        ("cosserat", "scalar", CosseratParams(macro, 452.6, 0.583)),
        ("mm-simple", "lagrange", MicromorphicSimpleParams(MICRO, macro, 2.0, 1.93836)),
        ("mm-iso", "lagrange", MicromorphicIsoParams(MICRO, macro, 2.0, 1.0, 0.5, 0.25)),
    ]


# ---------------------------------------------------------------------------
# reference bases


def test_q2_center_kronecker():
    vals, _ = lagrange_basis("Q2", [[0.0, 0.0]])
    np.testing.assert_allclose(vals[0], np.eye(9)[4], atol=1e-15)


def test_t2_nodal_kronecker():
    nodes = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]], dtype=float)
    vals, _ = lagrange_basis("T2", nodes)
    np.testing.assert_allclose(vals, np.eye(6), atol=1e-15)


@pytest.mark.parametrize("family", ["Q2", "T2"])
def test_lagrange_partition_of_unity_and_gradients(family, rng):
    p = rng.uniform(0, 0.5, (5, 2)) if family == "T2" else rng.uniform(-1, 1, (5, 2))
    vals, grads = lagrange_basis(family, p)
    np.testing.assert_allclose(vals.sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-13)
    h = 1e-6
    for k in range(2):
        dp = np.zeros(2)
        dp[k] = h
        fd = (lagrange_basis(family, p + dp)[0] - lagrange_basis(family, p - dp)[0]) / (2 * h)
        np.testing.assert_allclose(grads[:, :, k], fd, atol=1e-8)


def test_quadrature_rules_integrate_polynomials():
    pts, w = gauss_quad(3)
    f = pts[:, 0] ** 4 * pts[:, 1] ** 2
    assert np.sum(w * f) == pytest.approx((2 / 5) * (2 / 3), rel=1e-14)
    pts, w = triangle_rule_deg4()
    # int x^a y^b over the unit simplex = a! b! / (a + b + 2)!
    assert np.sum(w) == pytest.approx(0.5, rel=1e-12)
    assert np.sum(w * pts[:, 0] ** 2 * pts[:, 1] ** 2) == pytest.approx(4 / 720, rel=1e-9)


def _ned_interpolant(field, pts, signs=(1, 1, 1, 1)):
    vals, curls = nedelec_basis(pts, signs)
    dofs = nedelec_dofs(field)
    return np.einsum("qjc,j->qc", vals, dofs), curls @ dofs


def test_nedelec_reproduces_constants(rng):
    pts = rng.uniform(-1, 1, (5, 2))
    const = np.array([0.3, -1.7])
    v, c = _ned_interpolant(lambda p: np.tile(const, (len(p), 1)), pts)
    np.testing.assert_allclose(v, np.tile(const, (5, 1)), atol=1e-13)
    np.testing.assert_allclose(c, 0.0, atol=1e-13)


def test_nedelec_gradient_is_curl_free(rng):
    pts = rng.uniform(-1, 1, (5, 2))
    # grad(x^2 y) = (2 x y, x^2)
    field = lambda p: np.column_stack([2 * p[:, 0] * p[:, 1], p[:, 0] ** 2])  # noqa: E731
    v, c = _ned_interpolant(field, pts)
    np.testing.assert_allclose(v, field(pts), atol=1e-13)
    assert np.max(np.abs(c)) <= 1e-12


def test_nedelec_curl_matches_values(rng):
    pts = rng.uniform(-0.9, 0.9, (5, 2))
    vals, curls = nedelec_basis(pts)
    h = 1e-6
    dv2 = (nedelec_basis(pts + [h, 0])[0][..., 1] - nedelec_basis(pts - [h, 0])[0][..., 1]) / (2 * h)
    dv1 = (nedelec_basis(pts + [0, h])[0][..., 0] - nedelec_basis(pts - [0, h])[0][..., 0]) / (2 * h)
    np.testing.assert_allclose(curls, dv2 - dv1, atol=1e-7)


def test_nedelec_sign_flip():
    pts = np.array([[0.2, -0.4], [0.7, 0.1]])
    v, c = nedelec_basis(pts)
    vf, cf = nedelec_basis(pts, (1, -1, 1, 1))
    flip = np.ones(12)
    flip[2:4] = -1
    np.testing.assert_allclose(vf, v * flip[None, :, None], atol=1e-15)
    np.testing.assert_allclose(cf, c * flip[None, :], atol=1e-15)


def test_nedelec_tangential_traces_are_local():
    s = np.linspace(-1, 1, 7)
    for e, spec in enumerate(NED_EDGES):
        vals, _ = nedelec_basis(edge_points(e, s))
        vt = vals[:, :, spec["comp"]]
        own = [2 * e, 2 * e + 1]
        others = [j for j in range(12) if j not in own]
        assert np.max(np.abs(vt[:, others])) <= 1e-12
        assert np.max(np.abs(vt[:, own])) > 0.1


def _physical_rows(mesh, dm, d, e, ref):
    """Micro-distortion rows ``(2, npts, 2)`` of element ``e`` at reference points."""
    vals, _ = nedelec_basis(ref, tuple(mesh.elem_edge_signs[e]))
    x = mesh.nodes[mesh.elements[e]]
    half = 0.5 * (x[8] - x[0])
    dofs = d[dm.p[e]].reshape(2, 12)
    return np.einsum("qjc,rj->rqc", vals, dofs) / half


def test_nedelec_global_tangential_conformity(rng):
    mesh = build_homogeneous_mesh(4, "Q2NQ2", 1, "cosine")
    dm = build_dofmap(mesh, "nedelec")
    d = rng.normal(size=dm.ndofs)
    s = np.linspace(-1, 1, 5)
    owners = {}
    for e in range(mesh.n_elements):
        for k, g in enumerate(mesh.elem_edges[e]):
            owners.setdefault(int(g), []).append((e, k))
    worst = 0.0
    for g, own in owners.items():
        if len(own) != 2:
            continue
        traces = []
        for e, k in own:
            comp = NED_EDGES[k]["comp"]
            traces.append(_physical_rows(mesh, dm, d, e, edge_points(k, s))[:, :, comp])
        worst = max(worst, np.max(np.abs(traces[0] - traces[1])))
    assert worst <= 1e-12


def test_nedelec_interpolates_quadratic_gradients(rng):
    disc = continuum_discretization("rmm", 1)
    coef = rng.uniform(-0.05, 0.05, (2, 3))
    mode = DeformationMode(rng.uniform(-0.05, 0.05, (2, 2)), coef)
    from rmmfit.loading import eval_mode, eval_mode_grad
    d = interpolate(disc.dofmap, u=lambda x: eval_mode(mode, x), P=lambda x: eval_mode_grad(mode, x))
    st = state_at_quadrature(disc, d)
    exact = eval_mode_grad(mode, disc.op.points.reshape(-1, 2)).reshape(st.P.shape)
    np.testing.assert_allclose(st.P, exact, atol=1e-13)
    np.testing.assert_allclose(st.grad_u, exact, atol=1e-13)


# ---------------------------------------------------------------------------
# assembly


def test_stiffness_symmetry(model_cases, geom):
    for name, kind, params in model_cases:
        disc = continuum_discretization(name, 1, cells=4, p_kind=kind)
        K = assemble_system(disc, get_model(name), params, 2.0).K
        assert sp.linalg.norm(K - K.T) <= 1e-12 * sp.linalg.norm(K), name
    K = assemble_system(heterogeneous_discretization(geom, 1), get_model("het"), HeterogeneousParams(geom), 1).K
    assert sp.linalg.norm(K - K.T) <= 1e-12 * sp.linalg.norm(K)


def test_patch_constant_state(model_cases):
    g = np.array([[0.012, -0.004], [0.007, -0.009]])
    for name, kind, params in model_cases:
        model = get_model(name)
        disc = continuum_discretization(name, 1, cells=3, p_kind=kind)
        if kind is None:
            d = interpolate(disc.dofmap, u=lambda x: x @ g.T)
            exact = FieldState(g)
        elif kind == "scalar":
            a = 0.5 * (g[0, 1] - g[1, 0])
            d = interpolate(disc.dofmap, u=lambda x: x @ g.T, A=lambda x: np.full(len(x), a))
            exact = FieldState(g, A=np.array(a), grad_A=np.zeros(2))
        else:
            d = interpolate(disc.dofmap, u=lambda x: x @ g.T, P=lambda x: np.broadcast_to(g, (len(x), 2, 2)))
            exact = FieldState(g, g, np.zeros(2), np.zeros((2, 2, 2)))
        w_exact = float(model.density(params, exact, 1.7))  # domain area is 1
        e_quad = integrate_density(disc, model, params, 1.7, d)
        H = model.element_hessians(params, 1.7, disc.mesh)
        e_form = quadratic_energy(disc.op, H, d)
        assert e_quad == pytest.approx(w_exact, rel=1e-10), name
        assert e_form == pytest.approx(w_exact, rel=1e-10), name


def test_linear_elastic_affine_solution_exact(macro):
    disc = continuum_discretization("le", 1)
    B = np.array([[0.01, 0.02], [-0.005, 0.03]])
    e = ModeSolver(disc, get_model("le"), LinearElasticParams(macro), 1.0, "quadratic").energy(DeformationMode(B))
    eps = 0.5 * (B + B.T)
    v = np.array([eps[0, 0], eps[1, 1], 2 * eps[0, 1]])
    from rmmfit.materials import voigt
    assert e == pytest.approx(0.5 * v @ voigt(macro) @ v, rel=1e-10)


@pytest.mark.parametrize("kind", ["nedelec", "lagrange"])
def test_rigid_rotation_costs_nothing(macro, kind):
    disc = continuum_discretization("rmm", 1, p_kind=kind)
    params = RMMParams(MICRO, macro, 1.93836)
    mode = DeformationMode([[0.0, 0.03], [-0.03, 0.0]])
    assert ModeSolver(disc, get_model("rmm"), params, 1.0).energy(mode) <= 1e-12


def test_quadrature_energy_matches_quadratic_form(model_cases):
    mode = random_modes(1, 3)[0]
    for name, kind, params in model_cases:
        model = get_model(name)
        disc = continuum_discretization(name, 1, cells=6, p_kind=kind)
        ms = ModeSolver(disc, model, params, 2.0)
        d = ms.solve(mode)
        form = ms.base.energy(d)
        assert ms.energy(mode, d) == pytest.approx(form, rel=1e-10), name


def test_total_energy_helpers(macro):
    mesh = build_homogeneous_mesh(4, "Q2NQ2")
    params = RMMParams(MICRO, macro, 1.0)
    system = assemble(mesh, "rmm", params, 1.0)
    assert total_energy(mesh, "rmm", params, 1.0, np.zeros(system.ndofs)) == 0.0
    disc = continuum_discretization("rmm", 1, cells=4, grading="uniform")
    ms = ModeSolver(disc, get_model("rmm"), params, 1.0)
    mode = random_modes(1, 8)[0]
    d = ms.solve(mode)
    assert total_energy(mesh, "rmm", params, 1.0, d) == pytest.approx(ms.energy(mode, d), rel=1e-12)


def test_energy_quadruples_with_amplitude(macro):
    disc = continuum_discretization("rmm", 1)
    ms = ModeSolver(disc, get_model("rmm"), RMMParams(MICRO, macro, 1.0), 1.0)
    mode = random_modes(1, 5)[0]
    assert ms.energy(mode.scaled(2.0)) == pytest.approx(4 * ms.energy(mode), rel=1e-10)


def test_inadmissible_parameters_rejected_before_assembly(macro):
    disc = continuum_discretization("rmm", 1)
    with pytest.raises(ConstraintError):
        assemble_system(disc, get_model("rmm"), RMMParams(CubicModuli(5.0, 26.0, 8.0), macro, 1.0), 1.0)


# ---------------------------------------------------------------------------
# constraints and coupling


def test_dirichlet_fixes_mode_values():
    mesh = build_homogeneous_mesh(2, "Q2")
    dm = build_dofmap(mesh)
    system = AssembledSystem(sp.identity(dm.ndofs, format="csr"), np.zeros(dm.ndofs), dm)
    apply_dirichlet(system, DeformationMode(0.01 * np.eye(2)))
    corner = mesh.boundary["corners"]["top_right"]
    assert system.fixed[2 * corner] == pytest.approx(0.005)
    assert system.fixed[2 * corner + 1] == pytest.approx(0.005)


def test_periodic_zero_strain_gives_zero_solution(geom):
    disc = heterogeneous_discretization(geom, 1)
    system = assemble_system(disc, get_model("het"), HeterogeneousParams(geom), 1)
    apply_periodic(system, periodic_pairs(disc.mesh), np.zeros((2, 2)))
    assert np.max(np.abs(solve_spd(system))) <= 1e-14


def test_periodic_solution_is_periodic(geom):
    disc = heterogeneous_discretization(geom, 1)
    ms = ModeSolver(disc, get_model("het"), HeterogeneousParams(geom), 1, "periodic")
    B = np.array([[0.01, 0.02], [0.02, -0.01]])
    d = ms.solve(DeformationMode(B))
    u = d[: 2 * disc.mesh.n_nodes].reshape(-1, 2) - disc.mesh.nodes @ B.T
    for m, s in periodic_pairs(disc.mesh):
        np.testing.assert_allclose(u[s], u[m], atol=1e-14)


def test_conflicting_constraints_raise():
    mesh = build_homogeneous_mesh(1, "Q2")
    dm = build_dofmap(mesh)
    system = AssembledSystem(sp.identity(dm.ndofs, format="csr"), np.zeros(dm.ndofs), dm)
    fix(system, [0], [1.0])
    with pytest.raises(ConstraintError):
        fix(system, [0], [2.0])
    with pytest.raises(ConstraintError):
        slave(system, 2, 0, 0.0)
    slave(system, 4, 6, 0.0)
    with pytest.raises(ConstraintError):
        slave(system, 8, 6, 0.0)


def test_penalty_vanishes_for_compatible_fields():
    disc = continuum_discretization("rmm", 1, cells=4)
    mode = random_modes(1, 9)[0]
    from rmmfit.loading import eval_mode, eval_mode_grad
    d = interpolate(disc.dofmap, u=lambda x: eval_mode(mode, x), P=lambda x: eval_mode_grad(mode, x))
    bop = build_boundary_operator(disc.dofmap)
    residual = np.einsum("eqsi,ei->eqs", bop.B, d[bop.edofs])
    assert np.max(np.abs(residual)) <= 1e-13
    pen = assemble_boundary_penalty(bop, 1e5)
    assert 0.5 * d @ (pen @ d) <= 1e-10 * 1e5 * (d @ d)


def test_penalty_coupling_robust_and_consistent(geom, macro):
    modes = [canonical_modes()[k] for k in ("eps1", "bend_xy", "bend_xx")] + random_modes(2, 4)
    params = RMMParams(MICRO, macro, 1.93836)
    model = get_model("rmm")
    disc = continuum_discretization(model, 1)
    kappa = default_kappa(geom.matrix.mu)
    strong = ModeSolver(disc, model, params, 1.0).energies(modes)
    pen = ModeSolver(disc, model, params, 1.0, coupling="penalty", kappa=kappa).energies(modes)
    pen10 = ModeSolver(disc, model, params, 1.0, coupling="penalty", kappa=10 * kappa).energies(modes)
    assert np.max(np.abs(pen10 / pen - 1)) <= 1e-3
    assert np.max(np.abs(pen / strong - 1)) <= 1e-2
    # the penalty relaxes the constraint, so its energy cannot exceed the strong one
    assert np.all(pen <= strong * (1 + 1e-12))


# ---------------------------------------------------------------------------
# solver


def _system(K):
    mesh = build_homogeneous_mesh(1, "Q2")
    dm = build_dofmap(mesh)
    return dm, AssembledSystem(sp.csr_matrix(K), np.zeros(K.shape[0]), dm)


def test_identity_solve():
    f = SPDFactor(sp.identity(1, format="csc"))
    assert f.solve(np.array([3.0]))[0] == 3.0


def test_random_spd_manufactured_solution(rng):
    A = rng.normal(size=(50, 50))
    K = A @ A.T + 50 * np.eye(50)
    x = rng.normal(size=50)
    sol = SPDFactor(sp.csc_matrix(K)).solve(K @ x)
    assert np.linalg.norm(sol - x) <= 1e-10 * np.linalg.norm(x)


def test_indefinite_matrix_raises():
    K = np.diag([2.0, 1.0, 3.0])
    K[0, 1] = K[1, 0] = 3.0   # 2x2 block with negative determinant
    with pytest.raises(SolverError) as exc:
        SPDFactor(sp.csc_matrix(K))
    assert exc.value.pivot is not None
    with pytest.raises(SolverError):
        SPDFactor(sp.csc_matrix(np.diag([1.0, -1.0])))


def test_negative_coupling_modulus_is_rejected(macro):
    disc = continuum_discretization("cosserat", 1, cells=2)
    with pytest.raises(ConstraintError):
        assemble_system(disc, get_model("cosserat"), CosseratParams(macro, -1.0, 1.0), 1.0)
