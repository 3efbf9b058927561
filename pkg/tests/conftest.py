import numpy as np
import pytest

from complex_linalg import RankProfile
from ensemble import Ensemble, random_ensemble
from med_solver import SolverConfig


def _make_pure(priors, vectors):
    states = []
    for v in vectors:
        v = np.asarray(v, dtype=complex)
        v = v / np.linalg.norm(v)
        states.append(np.outer(v, v.conj()))
    return Ensemble(RankProfile((1,) * len(states)), np.asarray(priors, dtype=float), tuple(states))


@pytest.fixture
def make_pure():
    """Factory for ensembles of pure states, profile (1, ..., 1)."""
    return _make_pure


@pytest.fixture
def helstrom_pair():
    return _make_pure([0.5, 0.5], [[1, 0], [1, 1]])


@pytest.fixture
def skew_pair():
    return _make_pure([0.9, 0.1], [[1, 0], [1, 1]])


@pytest.fixture
def orthogonal_pair():
    return _make_pure([0.5, 0.5], [[1, 0], [0, 1]])


@pytest.fixture
def random_21():
    return random_ensemble(RankProfile((2, 1)), 7)


@pytest.fixture
def qutrit_triple():
    return random_ensemble(RankProfile((1, 1, 1)), 3)


@pytest.fixture
def solver_config():
    return SolverConfig()
