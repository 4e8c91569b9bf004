import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from oracles import boundary_op
from strangsplit import corrector as corr
from strangsplit.corrector import CorrectorRule, extend_analytic, extend_harmonic
from strangsplit.errors import CorrectorBoundError, MultigridConvergenceError, TraceMismatchError
from strangsplit.flows import QuadraticReaction, ReactionTerm, ZeroReaction, reaction_flow
from strangsplit.harness.problems import quadratic1d, stiff1d_m3_expression, stiff2d
from strangsplit.mesh import BoundarySpec, Grid, build_laplacian, dirichlet, neumann
from strangsplit.multigrid import MultigridConfig, solve

TIGHT = MultigridConfig(tol=1e-12)


def mixed(n=50):
    return build_laplacian(Grid(1, n), BoundarySpec(left=dirichlet(1.0), right=neumann(1.0)))


def test_zero_trace_gives_zero():
    d = mixed()
    q = extend_harmonic({"left": np.zeros(1), "right": np.zeros(1)}, d)
    assert np.all(q.values == 0.0)


@pytest.mark.parametrize("a,s", [(1.0, 1.0), (-2.0, 0.5), (0.3, -4.0)])
def test_1d_harmonic_is_affine(a, s):
    d = mixed(200)
    q = extend_harmonic({"left": np.array([a]), "right": np.array([s])}, d, TIGHT)
    np.testing.assert_allclose(q.values, a + s * d.grid.nodes, atol=1e-8)


def test_multigrid_matches_direct_2d():
    d = stiff2d(1.0, n=31).discretize().d
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal(d.grid.n_total)
    x = solve(d, rhs, MultigridConfig(tol=1e-11))
    ref = spla.spsolve(d.A.tocsc(), rhs)
    assert np.max(np.abs(x - ref)) / np.max(np.abs(ref)) < 1e-8


def test_multigrid_nonconvergence_reports_residual():
    d = mixed(100)
    with pytest.raises(MultigridConvergenceError) as exc:
        solve(d, np.ones(100), MultigridConfig(tol=1e-14, max_cycles=2))
    assert exc.value.residual > 1e-14


def test_2d_residual_decreases_over_cycles():
    spec = stiff2d(1.0, n=63)
    p = spec.discretize()
    d = p.d
    w = reaction_flow(p.reaction, p.u0, 0.5 * 0.025)
    trace = corr.boundary_trace_m5a(p.u0, w, 0.025, d)
    history = []
    extend_harmonic(trace, d, MultigridConfig(cycles=6), history)
    assert len(history) == 6
    assert all(b < a for a, b in zip(history, history[1:]))
    assert history[-1] < 1e-4


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4),
       st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_harmonic_extension_linear_in_trace(t1, t2):
    d = mixed(40)
    a = {"left": np.array([t1[0]]), "right": np.array([t1[1]])}
    b = {"left": np.array([t2[0]]), "right": np.array([t2[1]])}
    ab = {k: 2.0 * a[k] - 0.5 * b[k] for k in a}
    cfg = MultigridConfig(cycles=3)
    qa, qb, qab = (extend_harmonic(t, d, cfg).values for t in (a, b, ab))
    np.testing.assert_allclose(qab, 2.0 * qa - 0.5 * qb, atol=1e-9)


def test_trace_fidelity_exact_by_construction():
    spec = stiff2d(100.0, n=31)
    p = spec.discretize()
    d = p.d
    trace = corr.boundary_trace_m3(p.u0, p.reaction, d)
    q = extend_harmonic(trace, d)       # only 2 cycles: interior is approximate
    assert max(corr.trace_discrepancy(q.values, trace, d).values()) < 1e-12


def test_m5a_zero_reaction_gives_zero_trace():
    d = mixed()
    u = np.linspace(1, 2, d.grid.n + 2)
    trace = corr.boundary_trace_m5a(u, reaction_flow(ZeroReaction(), u, 0.01), 0.02, d)
    assert all(np.all(v == 0) for v in trace.values())


def test_m5a_dirichlet_algebra():
    d = mixed()
    tau, f0 = 0.04, 3.0
    u = np.ones(d.grid.n + 2)
    w = u + 0.5 * tau * f0
    trace = corr.boundary_trace_m5a(u, w, tau, d)
    assert trace["left"][0] == pytest.approx(f0, rel=1e-13)
    with pytest.raises(ValueError):
        corr.boundary_trace_m5a(u, w, 0.0, d)


def test_first_step_trace_quadratic():
    p = quadratic1d(1.0, n=100).discretize()
    for tau in (0.02, 0.005):
        w = reaction_flow(p.reaction, p.u0, tau / 2)
        ta = corr.boundary_trace_m5a(p.u0, w, tau, p.d)
        tb = corr.boundary_trace_m5b(w, p.d.boundary_values(0.0), tau, p.d)
        want = (2 / tau) * (1 / (1 - tau / 2) - 1)
        assert ta["left"][0] == pytest.approx(want, rel=1e-12)
        assert ta["left"][0] == tb["left"][0]
        # derivative faces: B u0 = b0 only up to rounding of the one-sided stencil,
        # amplified by 2 / tau; compare on the scale of the differenced terms
        scale = (2 / tau) * np.max(np.abs(p.u0)) / p.grid.dx
        assert abs(ta["right"][0] - tb["right"][0]) <= 1e-14 * scale
        # hand-written stencil, independent of the mesh module
        dx = p.grid.dx
        hand = (2 / tau) * (boundary_op(w, dx, 0, 1, "right") - boundary_op(p.u0, dx, 0, 1, "right"))
        assert ta["right"][0] == pytest.approx(hand, rel=1e-10)


def test_m3_trace_matches_closed_form_corrector():
    for m in (1.0, 5.0):
        spec = quadratic1d(m, n=100)
        p = spec.discretize()
        trace = corr.boundary_trace_m3(p.u0, p.reaction, p.d)
        assert trace["left"][0] == pytest.approx(m, rel=1e-13)
        assert trace["right"][0] == pytest.approx(2 * m * p.u0[-1], rel=1e-12)
        q = extend_analytic(spec.m3_expression, p.u0, p.d, trace)
        assert q.provenance == "analytic"


def test_stiff1d_closed_form_corrector():
    M = 100.0
    g = Grid(1, 100)
    bc = BoundarySpec(left=dirichlet(1.0), right=neumann(1.0))
    d = build_laplacian(g, bc)
    f = QuadraticReaction(g, lambda x: 1 - M * np.sin(np.pi * x), lambda x: (-M * np.pi * np.cos(np.pi * x),))
    u = d.reconstruct(d.interior(g.sample(lambda x: 1 + 2 / np.pi - (2 / np.pi) * np.cos(np.pi * x / 2))),
                      d.boundary_values(0.0), 0.0)
    trace = corr.boundary_trace_m3(u, f, d)
    q = extend_analytic(stiff1d_m3_expression(M), u, d, trace)
    assert np.max(np.abs(q.values)) > M


def test_m3_generic_trace_uses_discrete_b():
    d = mixed()
    u = np.linspace(1, 2, d.grid.n + 2)
    f = ReactionTerm(lambda v: np.sin(v))
    trace = corr.boundary_trace_m3(u, f, d)
    dx = d.grid.dx
    assert trace["right"][0] == pytest.approx(boundary_op(np.sin(u), dx, 0, 1, "right"), rel=1e-12)


def test_analytic_trace_mismatch():
    d = mixed()
    u = np.ones(d.grid.n + 2)
    with pytest.raises(TraceMismatchError) as exc:
        extend_analytic(lambda u, d: 0.0, u, d, {"left": np.array([1.0]), "right": np.array([0.0])})
    assert exc.value.face == "left"


def test_corrector_cap():
    d = mixed()
    rule = CorrectorRule("m5a", cap=10.0)
    with pytest.raises(CorrectorBoundError):
        corr.build(rule, {"left": np.array([100.0]), "right": np.array([0.0])}, None, d)


def test_rule_validation():
    with pytest.raises(ValueError):
        CorrectorRule("m7")
    with pytest.raises(ValueError):
        CorrectorRule("m3", "analytic")
    assert corr.build(CorrectorRule("none"), None, None, mixed()).provenance == "zero"
