"""Tests for the Newton and continuation solvers."""
from unittest.mock import patch

import numpy as np
import pytest
import scipy.linalg
from scipy.stats import unitary_group

import med_solver
from baselines import barrier_solve, helstrom_two_state
from certificates import check_optimal, check_projective
from complex_linalg import RankProfile, assemble_block_diagonal, block_diagonal_part
from ensemble import decompose, random_ensemble, rotate_decomposition, success_probability
from exceptions import (
    MaxIterationsExceeded,
    NonPositiveIterate,
    NotPositiveDefinite,
    PathBreakdown,
    ShapeMismatch,
    SingularLinearSystem,
)
from gram import GramMatrix, build_gram, dual_basis, homotopy_path
from med_solver import (
    HomotopySolver,
    NewtonSolver,
    SolverConfig,
    closed_form_start,
    derivative_of_D,
    homotopy_solve,
    newton_solve,
    povm_from_solution,
    residual,
    solve_ensemble,
    taylor_derivatives,
)

HELSTROM_PS = 0.5 * (1.0 + np.sqrt(0.5))


def gram_of(e):
    d = decompose(e)
    return d, build_gram(d)


def test_config_validation():
    """Invalid solver settings raise ValueError naming the field."""
    with pytest.raises(ValueError, match="tol"):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError, match="max_iters"):
        SolverConfig(max_iters=0)
    with pytest.raises(ValueError, match="damping"):
        SolverConfig(damping=1.5)
    with pytest.raises(ValueError, match="jacobian"):
        SolverConfig(jacobian="exact")


def test_residual_identity():
    """G = I and D = I solve the equation with M = I."""
    g = GramMatrix(RankProfile((2, 1)), np.eye(3))
    value, M = residual(np.eye(3), g)
    assert value == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(M, np.eye(3), atol=1e-14)


def test_residual_vanishes_for_diagonal_gram():
    """For diagonal G the root of each diagonal entry is a solution."""
    g = GramMatrix(RankProfile((1, 1, 1)), np.diag([0.2, 0.3, 0.5]))
    value, _ = residual(np.diag(np.sqrt([0.2, 0.3, 0.5])), g)
    assert value == pytest.approx(0.0, abs=1e-14)


def test_residual_matches_independent_recomputation(random_21):
    """The residual equals ||blockdiag(sqrtm(DGD)) - D^2|| computed with scipy."""
    _, g = gram_of(random_21)
    rng = np.random.default_rng(2)
    A = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    D = assemble_block_diagonal([A @ A.conj().T + np.eye(2), np.array([[0.7]])], g.profile)
    root = scipy.linalg.sqrtm(D @ g.matrix @ D)
    expected = np.linalg.norm(block_diagonal_part(root, g.profile) - D @ D)
    value, M = residual(D, g)
    assert value == pytest.approx(expected, rel=1e-9)
    np.testing.assert_allclose(M, root, atol=1e-10)


def test_residual_rejects_singular_D(random_21):
    """A singular D makes DGD singular."""
    _, g = gram_of(random_21)
    with pytest.raises(NotPositiveDefinite):
        residual(np.diag([1.0, 1.0, 0.0]), g)


def test_newton_identity_gram():
    """G = I is solved by D = I immediately."""
    sol = newton_solve(GramMatrix(RankProfile((2, 1)), np.eye(3)))
    np.testing.assert_allclose(sol.D, np.eye(3), atol=1e-12)
    assert sol.iterations <= 1


def test_newton_reproduces_helstrom(helstrom_pair):
    """The Newton measurement of the Helstrom pair scores the Helstrom bound."""
    result = solve_ensemble(helstrom_pair, "newton")
    assert result.p_success == pytest.approx(HELSTROM_PS, abs=1e-10)
    assert result.residual <= SolverConfig().tol


def test_newton_solution_invariants(random_21):
    """M is PD, M^2 = DGD and blockdiag(M) = D^2."""
    _, g = gram_of(random_21)
    sol = newton_solve(g)
    assert np.linalg.eigvalsh(sol.M)[0] > 0
    np.testing.assert_allclose(sol.M @ sol.M, sol.D @ g.matrix @ sol.D, atol=1e-10)
    np.testing.assert_allclose(block_diagonal_part(sol.M, g.profile), sol.D @ sol.D, atol=1e-10)
    W = sol.rotation(g)
    np.testing.assert_allclose(W.conj().T @ W, np.eye(3), atol=1e-8)


def test_newton_agrees_with_barrier(random_21):
    """P_s from Newton matches the barrier dual value."""
    result = solve_ensemble(random_21, "newton")
    _, upper = barrier_solve(random_21)
    assert result.p_success == pytest.approx(upper, abs=1e-6)


def test_finite_difference_jacobian_converges_to_same_solution(random_21):
    """Forward-difference and analytic Jacobians reach the same D."""
    _, g = gram_of(random_21)
    analytic = newton_solve(g, SolverConfig())
    finite = newton_solve(g, SolverConfig(jacobian="finite", tol=1e-10))
    np.testing.assert_allclose(finite.D, analytic.D, atol=1e-8)


def test_solution_follows_block_unitary_rotation(random_21):
    """Rotating the decomposition by U_D rotates the solution to U^H D U."""
    d, g = gram_of(random_21)
    blocks = [unitary_group.rvs(2, random_state=1), np.array([[np.exp(0.3j)]])]
    U = assemble_block_diagonal(blocks, d.profile)
    rotated = build_gram(rotate_decomposition(d, blocks))
    D = newton_solve(g).D
    D_rot = newton_solve(rotated).D
    np.testing.assert_allclose(D_rot, U.conj().T @ D @ U, atol=1e-8)


def test_newton_iteration_cap(random_21):
    """A single iteration is not enough from the closed-form start."""
    _, g = gram_of(random_21)
    with pytest.raises(MaxIterationsExceeded):
        newton_solve(g, SolverConfig(max_iters=1))


def test_newton_rejects_non_positive_start(random_21):
    """An indefinite initial D raises NonPositiveIterate."""
    _, g = gram_of(random_21)
    with pytest.raises(NonPositiveIterate):
        newton_solve(g, init=-np.eye(3))


def test_taylor_derivatives_vanish_on_constant_path(random_21):
    """With G1 = G0 every derivative is zero."""
    _, g = gram_of(random_21)
    g0 = g.block_diagonal()
    derivs = taylor_derivatives((g0, g0), closed_form_start(g0), 3)
    assert len(derivs) == 3
    for x in derivs:
        assert np.max(np.abs(x)) < 1e-12


def test_taylor_derivatives_match_diagonal_closed_form():
    """On a diagonal path D(t) = sqrt(G(t)); first and second derivatives agree."""
    profile = RankProfile((1, 1))
    a, b = np.array([0.3, 0.7]), np.array([0.6, 0.4])
    g0, g1 = GramMatrix(profile, np.diag(a)), GramMatrix(profile, np.diag(b))
    t = 0.25
    gt = (1 - t) * a + t * b
    derivs = taylor_derivatives((g0, g1), np.diag(np.sqrt(gt)), 2, t)
    delta = b - a
    np.testing.assert_allclose(np.diag(derivative_of_D(derivs[0], profile)).real, delta / (2 * np.sqrt(gt)), atol=1e-6)
    np.testing.assert_allclose(
        np.diag(derivative_of_D(derivs[1], profile)).real, -delta ** 2 / (4 * gt ** 1.5), atol=1e-6
    )


def test_first_derivative_matches_finite_difference():
    """The order-1 derivative agrees with a central difference of Newton solutions."""
    e = random_ensemble(RankProfile((2, 1)), 17)
    _, g1 = gram_of(e)
    g0 = g1.block_diagonal()
    t, h = 0.5, 1e-4
    cfg = SolverConfig()
    D_t = newton_solve(homotopy_path(g0, g1, t), cfg).D
    D_plus = newton_solve(homotopy_path(g0, g1, t + h), cfg, init=D_t).D
    D_minus = newton_solve(homotopy_path(g0, g1, t - h), cfg, init=D_t).D
    fd = (D_plus - D_minus) / (2 * h)
    dD = derivative_of_D(taylor_derivatives((g0, g1), D_t, 1, t)[0], g1.profile)
    assert np.linalg.norm(dD - fd) <= 1e-4 * np.linalg.norm(fd)


def test_taylor_reports_singular_system(random_21):
    """A numerically singular derivative system raises SingularLinearSystem."""
    _, g = gram_of(random_21)
    g0 = g.block_diagonal()
    with patch("med_solver._MAX_CONDITION", 0.0):
        with pytest.raises(SingularLinearSystem):
            taylor_derivatives((g0, g), closed_form_start(g0), 2)


def test_homotopy_breaks_down_after_too_many_halvings(random_21):
    """Persistent singularity exhausts the allowed halvings."""
    _, g = gram_of(random_21)
    with patch("med_solver._MAX_CONDITION", 0.0):
        with pytest.raises(PathBreakdown):
            homotopy_solve(g)


def test_homotopy_survives_many_isolated_halvings(random_21):
    """Halvings are counted per step, so scattered failures along a long path are tolerated."""
    _, g = gram_of(random_21)
    real = med_solver.taylor_derivatives
    calls = []

    def every_other(path, D, order, t=0.0):
        calls.append(t)
        if len(calls) % 2 == 1:
            raise SingularLinearSystem("forced")
        return real(path, D, order, t)

    with patch("med_solver.taylor_derivatives", side_effect=every_other):
        sol = homotopy_solve(g, SolverConfig(intervals_override=30))
    assert len(calls) // 2 > med_solver.MAX_HALVINGS
    assert np.linalg.norm(sol.D - newton_solve(g).D) <= 1e-6


def test_homotopy_block_diagonal_target_is_closed_form():
    """A block-diagonal target needs no Taylor steps."""
    g = GramMatrix(RankProfile((2, 1)), np.diag([0.2, 0.3, 0.5]).astype(complex))
    sol = homotopy_solve(g)
    assert sol.taylor_steps == 0
    assert sol.iterations == 0
    np.testing.assert_allclose(sol.D, np.diag(np.sqrt([0.2, 0.3, 0.5])), atol=1e-14)


def test_homotopy_matches_newton_on_helstrom(helstrom_pair):
    """Both solvers give the same success probability on the Helstrom pair."""
    newton = solve_ensemble(helstrom_pair, "newton")
    homotopy = solve_ensemble(helstrom_pair, "homotopy")
    assert homotopy.method == "homotopy"
    assert homotopy.p_success == pytest.approx(newton.p_success, abs=1e-9)


def test_homotopy_output_is_certified():
    """Continuation on a random (2, 1, 1) instance passes the certificate."""
    e = random_ensemble(RankProfile((2, 1, 1)), 5)
    result = HomotopySolver().solve(e)
    assert result.solution.taylor_steps >= 1
    assert check_optimal(e, result.povm).passed


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("profile", [(1, 1, 1), (2, 2), (2, 1, 1), (2, 2, 1)])
def test_solvers_agree(profile, seed):
    """Newton and continuation agree on D and on P_s."""
    e = random_ensemble(RankProfile(profile), seed)
    _, g = gram_of(e)
    newton = newton_solve(g)
    homotopy = homotopy_solve(g)
    assert np.linalg.norm(newton.D - homotopy.D) <= 1e-6
    a = solve_ensemble(e, "newton").p_success
    b = solve_ensemble(e, "homotopy").p_success
    assert a == pytest.approx(b, abs=1e-9)


def test_povm_of_orthogonal_ensemble_is_support_projectors(orthogonal_pair):
    """Orthogonal states are measured by their support projectors."""
    result = solve_ensemble(orthogonal_pair)
    np.testing.assert_allclose(result.povm.elements[0], np.diag([1.0, 0.0]), atol=1e-10)
    np.testing.assert_allclose(result.povm.elements[1], np.diag([0.0, 1.0]), atol=1e-10)


def test_povm_of_helstrom_pair_matches_closed_form(helstrom_pair):
    """The solver projectors are the Helstrom projectors."""
    result = solve_ensemble(helstrom_pair)
    expected, _ = helstrom_two_state(helstrom_pair)
    for a, b in zip(result.povm.elements, expected.elements):
        np.testing.assert_allclose(a, b, atol=1e-8)


def test_povm_is_projective_and_complete(qutrit_triple):
    """The reconstructed measurement is projective, complete and of the right ranks."""
    d, g = gram_of(qutrit_triple)
    povm = povm_from_solution(newton_solve(g), d, dual_basis(d, g))
    report = check_projective(povm, qutrit_triple.profile)
    assert report.completeness_residual <= 1e-9
    assert report.projectivity_residual <= 1e-9
    assert all(report.rank_ok)


def test_povm_rejects_mismatched_inputs(random_21, qutrit_triple):
    """Solution and decomposition of different profiles raise ShapeMismatch."""
    d, g = gram_of(random_21)
    _, g3 = gram_of(qutrit_triple)
    with pytest.raises(ShapeMismatch):
        povm_from_solution(newton_solve(g3), d, dual_basis(d, g))


def test_newton_falls_back_to_continuation(helstrom_pair):
    """A failed Newton run is retried through continuation."""
    real = med_solver.newton_solve
    calls = []

    def flaky(g, cfg=SolverConfig(), init=None):
        calls.append(init)
        if len(calls) == 1:
            raise NonPositiveIterate("forced")
        return real(g, cfg, init)

    with patch("med_solver.newton_solve", side_effect=flaky):
        result = NewtonSolver().solve(helstrom_pair)
    assert result.method == "homotopy"
    assert result.p_success == pytest.approx(HELSTROM_PS, abs=1e-10)


def test_newton_fallback_can_be_disabled(helstrom_pair):
    """With fallback off the Newton failure propagates."""
    with patch("med_solver.newton_solve", side_effect=NonPositiveIterate("forced")):
        with pytest.raises(NonPositiveIterate):
            NewtonSolver(SolverConfig(fallback=False)).solve(helstrom_pair)


def test_unknown_solver_name(helstrom_pair):
    """An unknown method name is rejected."""
    with pytest.raises(ValueError, match="Unknown solver"):
        solve_ensemble(helstrom_pair, "simplex")


def test_success_probability_of_solution_matches_trace(random_21):
    """The reported P_s is the score of the returned measurement."""
    result = solve_ensemble(random_21)
    assert result.p_success == pytest.approx(success_probability(random_21, result.povm))
