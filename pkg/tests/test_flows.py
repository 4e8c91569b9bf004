import numpy as np
import pytest
import scipy.sparse.linalg as spla

from oracles import crank_nicolson, rk4
from strangsplit.errors import BlowUpError, DimensionError
from strangsplit.flows import (FlowCounters, IntegralReaction, QuadraticReaction, ReactionTerm,
                               ZeroReaction, diffusion_flow, projection_flow, reaction_flow,
                               reaction_minus_q_flow)
from strangsplit.matfun import MatFunBackend
from strangsplit.mesh import BoundarySpec, Grid, build_laplacian, dirichlet, neumann

BACKEND = MatFunBackend()


def test_quadratic_analytic_flow():
    g = Grid(1, 2)
    f = QuadraticReaction(g, 1.0)
    out = reaction_flow(f, np.ones(g.shape), 0.5)
    np.testing.assert_allclose(out, 2.0, rtol=1e-15)
    assert np.array_equal(f.flow(np.ones(g.shape), 0.0), np.ones(g.shape))


def test_quadratic_blowup_names_node():
    g = Grid(1, 3)
    f = QuadraticReaction(g, 1.0)
    u = np.array([0.5, 0.5, 3.0, 0.5, 0.5])
    with pytest.raises(BlowUpError) as exc:
        reaction_flow(f, u, 0.5)
    assert exc.value.node == (2,)


def test_zero_reaction_identity():
    u = np.linspace(0, 1, 7)
    assert np.array_equal(reaction_flow(ZeroReaction(), u, 3.0), u)


def test_integral_reaction_matches_fine_rk4():
    g = Grid(1, 500)
    f = IntegralReaction(g)
    u0 = g.sample(lambda x: 2 * (np.cos(np.pi * x) + 1))
    got = reaction_flow(f, u0, 1e-3, substeps=5)
    want = rk4(f, u0, 1e-3, 100)
    assert np.max(np.abs(got - want)) < 1e-10


def test_integral_kernel_trapezoid():
    g = Grid(1, 500)
    f = IntegralReaction(g)
    # u = 1: int_0^1 ds / (1 + |x - s|)^2 at x = 0 is 1/2
    assert f(np.ones(g.shape))[0] == pytest.approx(-0.5, abs=1e-5)
    with pytest.raises(DimensionError):
        IntegralReaction(Grid(2, 4))


def test_rk4_substep_order():
    f = ReactionTerm(lambda u: np.sin(u) * u + 0.3 * u**2, name="smooth")
    u0 = np.array([0.3, 0.8, 1.1])
    want = rk4(f, u0, 0.5, 4000)
    errs = [np.max(np.abs(reaction_flow(f, u0, 0.5, s) - want)) for s in (4, 8, 16, 32)]
    slope = -np.polyfit(np.log([4, 8, 16, 32]), np.log(errs), 1)[0]
    assert 3.8 <= slope <= 4.2


def test_reaction_minus_q():
    f = QuadraticReaction(Grid(1, 2), 1.0)
    u0 = np.full(4, 1.0)
    # q = 0 against the same RK4 sub-stepping of f alone (analytic flow bypassed)
    assert np.array_equal(reaction_minus_q_flow(f, np.zeros(4), u0, 0.1, 5),
                          reaction_flow(ReactionTerm(f), u0, 0.1, 5))
    q = np.full(4, 2.0)
    np.testing.assert_allclose(reaction_minus_q_flow(ZeroReaction(), q, u0, 0.25), u0 - 0.5, rtol=1e-15)
    got = reaction_minus_q_flow(f, np.ones(4), u0, 0.1, 5)
    want = rk4(lambda u: u * u - 1.0, u0, 0.1, 2000)
    assert np.max(np.abs(got - want)) < 1e-10


def test_projection_flow():
    u = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(projection_flow(np.ones(3), u, 0.0), u)
    np.testing.assert_allclose(projection_flow(np.full(3, 2.0), u, 0.5), u - 1.0)
    q = np.array([0.1, 0.7, 1.3])
    back = projection_flow(q, projection_flow(q, u, 0.25), -0.25)
    np.testing.assert_allclose(back, u, rtol=1e-15)


def test_counters():
    c = FlowCounters()
    g = Grid(1, 4)
    d = build_laplacian(g, BoundarySpec(left=dirichlet(1.0), right=neumann(0.0)))
    u = np.ones(g.shape)
    reaction_flow(ZeroReaction(), u, 0.1, counters=c)
    assert (c.diffusion, c.reaction) == (0, 1)
    reaction_minus_q_flow(ZeroReaction(), u, u, 0.1, counters=c)
    assert (c.diffusion, c.reaction) == (0, 2)
    projection_flow(u, u, 0.1)
    diffusion_flow(d, BACKEND, u, 0.0, 0.1, counters=c)
    assert (c.diffusion, c.reaction, c.total) == (1, 2, 3)


def mixed(n=40, left=lambda s, t: np.full(np.shape(s), 1.0), right=0.5):
    g = Grid(1, n)
    return build_laplacian(g, BoundarySpec(left=dirichlet(left), right=neumann(right)))


def test_steady_state_is_fixed_point():
    d = mixed()
    g_int = np.linspace(-1, 1, d.grid.n)
    ustar = spla.spsolve(d.A.tocsc(), -(g_int + d.forcing_at(0.0)))
    full = d.reconstruct(ustar, d.boundary_values(0.0), 0.0)
    for backend in (MatFunBackend("dense"), MatFunBackend("krylov")):
        out = diffusion_flow(d, backend, full, 0.0, 0.3, g_int)
        assert np.max(np.abs(out - full)) / np.max(np.abs(full)) < 1e-9


def test_eigenmode_decay():
    g = Grid(1, 63)
    d = build_laplacian(g, BoundarySpec(left=dirichlet(0.0), right=dirichlet(0.0)))
    u0 = g.sample(lambda x: np.sin(np.pi * x))
    mu = (4 / g.dx**2) * np.sin(np.pi * g.dx / 2) ** 2
    out = diffusion_flow(d, BACKEND, u0, 0.0, 0.05)
    np.testing.assert_allclose(out, np.exp(-mu * 0.05) * u0, atol=1e-13)


def test_time_linear_boundary_against_crank_nicolson():
    d = mixed(60, left=lambda s, t: np.full(np.shape(s), 2 * (2 - t)), right=0.0)
    g = d.grid
    u0 = d.reconstruct(d.interior(g.sample(lambda x: 2 * (np.cos(np.pi * x) + 1))),
                       d.boundary_values(0.0), 0.0)
    out = diffusion_flow(d, BACKEND, u0, 0.01, 0.02)
    want = crank_nicolson(d.A, d.forcing_at, d.interior(u0), 0.01, 0.02, 10_000)
    assert np.max(np.abs(d.interior(out) - want)) < 1e-8
    assert out[0] == pytest.approx(2 * (2 - 0.03), abs=1e-14)


@pytest.mark.parametrize("tau", [1e-3, 1e-2, 1e-1])
def test_constant_boundary_exact_vs_fine_oracle(tau):
    d = mixed(30)
    g = d.grid
    u0 = d.reconstruct(d.interior(g.sample(lambda x: 1 + np.sin(3 * x))), d.boundary_values(0.0), 0.0)
    out = diffusion_flow(d, BACKEND, u0, 0.0, tau)
    want = crank_nicolson(d.A, d.forcing_at, d.interior(u0), 0.0, tau, 20_000)
    assert np.max(np.abs(d.interior(out) - want)) / np.max(np.abs(want)) < 1e-8


def test_diffusion_flow_shape_checks():
    d = mixed(10)
    with pytest.raises(DimensionError):
        diffusion_flow(d, BACKEND, np.ones(5), 0.0, 0.1)
    with pytest.raises(ValueError):
        diffusion_flow(d, BACKEND, np.ones(d.grid.shape), 0.0, 0.0)
