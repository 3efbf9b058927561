"""Tests for ensembles, decompositions and measurements."""
from unittest.mock import patch

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from baselines import helstrom_two_state
from complex_linalg import RankProfile
from ensemble import (
    Ensemble,
    Povm,
    confusion_matrix,
    congruence,
    decompose,
    ensemble_distance,
    error_probability,
    random_ensemble,
    recompose,
    reorder,
    rotate_povm,
    seed_ensemble,
    success_probability,
    uniform_povm,
    unitary_rotate,
    validate,
)
from exceptions import DegenerateDraw, ProfileMismatch, RankMismatch, ShapeMismatch

HELSTROM_PS = 0.5 * (1.0 + np.sqrt(0.5))


def discriminator(n):
    return Povm(RankProfile((1,) * n), tuple(np.diag(np.eye(n)[k]) for k in range(n)))


def test_validate_orthogonal_pair(orthogonal_pair):
    """Computational basis states pass membership with profile (1, 1)."""
    report = validate(orthogonal_pair)
    assert report.passed
    assert report.ranks == [1, 1]


def test_validate_reports_prior_normalization(orthogonal_pair):
    """Priors summing to 0.9 fail the normalization check."""
    e = Ensemble(orthogonal_pair.profile, [0.45, 0.45], orthogonal_pair.states)
    report = validate(e)
    assert not report.passed
    assert "prior_normalization" in report.failures
    assert report.residuals["prior_normalization"] == pytest.approx(0.1)


def test_validate_rejects_identical_states(make_pure):
    """Two copies of one pure state are not linearly independent."""
    e = make_pure([0.5, 0.5], [[1, 1], [1, 1]])
    report = validate(e)
    assert "linear_independence" in report.failures


def test_validate_reports_rank_mismatch(orthogonal_pair):
    """A mixed state under a rank-one profile fails the rank check."""
    e = Ensemble(orthogonal_pair.profile, [0.5, 0.5], (np.eye(2) / 2, orthogonal_pair.states[1]))
    assert "rank" in validate(e).failures


def test_ensemble_shape_checks():
    """Construction rejects a wrong number of states or a wrong state shape."""
    with pytest.raises(ShapeMismatch):
        Ensemble(RankProfile((1, 1)), [1.0], (np.eye(2),))
    with pytest.raises(ShapeMismatch):
        Ensemble(RankProfile((1, 1)), [0.5, 0.5], (np.eye(2), np.eye(3)))


def test_seed_ensemble_is_orthogonal():
    """Seed states are maximally mixed on consecutive coordinate blocks."""
    e = seed_ensemble(RankProfile((2, 1)))
    np.testing.assert_allclose(e.priors, [2 / 3, 1 / 3])
    np.testing.assert_allclose(e.states[0], np.diag([0.5, 0.5, 0.0]))
    np.testing.assert_allclose(e.states[1], np.diag([0.0, 0.0, 1.0]))


def test_congruence_with_identity_returns_seed_pair():
    """T = I leaves the seed pair unchanged with priors (1/2, 1/2)."""
    e = congruence(RankProfile((1, 1)), np.eye(2))
    np.testing.assert_allclose(e.priors, [0.5, 0.5])
    np.testing.assert_allclose(e.states[0], np.diag([1.0, 0.0]))
    np.testing.assert_allclose(e.states[1], np.diag([0.0, 1.0]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_random_ensembles_validate(seed):
    """Every generated (2, 1) ensemble passes validation."""
    assert validate(random_ensemble(RankProfile((2, 1)), seed)).passed


def test_random_ensemble_is_deterministic():
    """The same seed gives the same ensemble."""
    a = random_ensemble(RankProfile((2, 2, 1)), 42)
    b = random_ensemble(RankProfile((2, 2, 1)), 42)
    np.testing.assert_array_equal(a.priors, b.priors)
    for x, y in zip(a.states, b.states):
        np.testing.assert_array_equal(x, y)


def test_random_ensemble_gives_up_on_ill_conditioned_draws():
    """When no draw is well conditioned the generator raises DegenerateDraw."""
    with patch("ensemble.MAX_CONDITION", 0.5):
        with pytest.raises(DegenerateDraw):
            random_ensemble(RankProfile((1, 1)), 0)


def test_decompose_pure_ensemble(helstrom_pair):
    """Pure states decompose into sqrt(p) times the state vector."""
    d = decompose(helstrom_pair)
    psi2 = np.array([1, 1]) / np.sqrt(2)
    assert abs(np.vdot(psi2, d.vectors[:, 1])) ** 2 == pytest.approx(0.5)
    np.testing.assert_allclose(d.squared_norms(), [0.5, 0.5])


def test_decompose_maximally_mixed_qubit():
    """I/2 with p = 1 gives two orthogonal vectors of squared norm 1/2."""
    e = Ensemble(RankProfile((2,)), [1.0], (np.eye(2) / 2,))
    d = decompose(e)
    np.testing.assert_allclose(d.squared_norms(), [0.5, 0.5])
    assert abs(np.vdot(d.vectors[:, 0], d.vectors[:, 1])) < 1e-14


def test_decompose_recompose_round_trip(random_21):
    """Each p_i rho_i is resolved by its block of vectors."""
    d = decompose(random_21)
    for i in range(random_21.m):
        np.testing.assert_allclose(d.block(i) @ d.block(i).conj().T, random_21.weighted(i), atol=1e-10)
    assert ensemble_distance(recompose(d), random_21) < 1e-10


def test_decompose_rejects_rank_mismatch(orthogonal_pair):
    """A state whose numerical rank differs from the profile raises RankMismatch."""
    e = Ensemble(orthogonal_pair.profile, [0.5, 0.5], (np.eye(2) / 2, orthogonal_pair.states[1]))
    with pytest.raises(RankMismatch, match="State 0"):
        decompose(e)


def test_success_of_orthogonal_discrimination(orthogonal_pair):
    """The computational basis measurement identifies orthogonal states perfectly."""
    assert success_probability(orthogonal_pair, discriminator(2)) == pytest.approx(1.0)
    assert error_probability(orthogonal_pair, discriminator(2)) == pytest.approx(0.0)


def test_success_of_uniform_guessing(qutrit_triple):
    """Pi_i = I / m scores 1 / m."""
    assert success_probability(qutrit_triple, uniform_povm(qutrit_triple.profile)) == pytest.approx(1 / 3)


def test_success_of_helstrom_measurement(helstrom_pair):
    """The Helstrom pair scores (1 + sqrt(1/2)) / 2 with its Helstrom measurement."""
    povm, _ = helstrom_two_state(helstrom_pair)
    assert success_probability(helstrom_pair, povm) == pytest.approx(HELSTROM_PS, abs=1e-12)


def test_success_shape_mismatch(helstrom_pair):
    """Scoring with a measurement of another dimension raises ShapeMismatch."""
    with pytest.raises(ShapeMismatch):
        success_probability(helstrom_pair, discriminator(3))


def test_confusion_rows_sum_to_priors(random_21):
    """Success plus the off-diagonal confusion mass is one."""
    C = confusion_matrix(random_21, uniform_povm(random_21.profile))
    np.testing.assert_allclose(C.sum(axis=1), random_21.priors, atol=1e-12)
    assert np.trace(C) + (C.sum() - np.trace(C)) == pytest.approx(1.0)


def test_success_invariant_under_joint_rotation(random_21):
    """Rotating ensemble and measurement together keeps P_s."""
    povm = Povm(random_21.profile, (np.diag([1.0, 1.0, 0.0]), np.diag([0.0, 0.0, 1.0])))
    U = unitary_group.rvs(3, random_state=5)
    rotated = success_probability(unitary_rotate(random_21, U), rotate_povm(povm, U))
    assert rotated == pytest.approx(success_probability(random_21, povm), abs=1e-12)


def test_distance_matches_equal_rank_permutations(qutrit_triple):
    """Reordering states of equal rank does not change the matched distance."""
    assert ensemble_distance(qutrit_triple, reorder(qutrit_triple, [2, 0, 1])) < 1e-15


def test_distance_requires_same_profile(random_21, qutrit_triple):
    """Ensembles of different profiles cannot be matched."""
    with pytest.raises(ProfileMismatch):
        ensemble_distance(random_21, qutrit_triple)
