"""Tests for the JSON document codec."""
import numpy as np
import pytest

from certificates import check_optimal
from complex_linalg import RankProfile
from documents import (
    dumps,
    ensemble_from_document,
    ensemble_to_document,
    ensembles_close,
    error_document,
    loads,
    matrix_from_json,
    matrix_to_json,
    povm_from_document,
    povm_to_document,
    profile_list,
    solution_to_document,
)
from ensemble import random_ensemble
from exceptions import InvalidDocument, InvalidEnsemble, ProfileMismatch, ShapeMismatch
from med_solver import solve_ensemble


@pytest.fixture
def pair_document():
    return {
        "dim": 2,
        "states": [
            {"p": 0.5, "rho": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]},
            {"p": 0.5, "rho": [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]]},
        ],
    }


def test_ensemble_round_trip_is_exact(random_21):
    """Serializing and parsing returns bit-identical priors and states."""
    doc = loads(dumps(ensemble_to_document(random_21, seed=7)))
    assert doc["metadata"] == {"profile": [2, 1], "seed": 7}
    e = ensemble_from_document(doc)
    assert e.profile == random_21.profile
    assert ensembles_close(e, random_21, 0.0)


def test_dumps_is_indented_with_trailing_newline():
    """Documents are written indented and end with a newline."""
    text = dumps({"a": 1})
    assert text == '{\n  "a": 1\n}\n'


def test_parse_pair_infers_profile(pair_document):
    """Without metadata the profile comes from the state ranks."""
    e = ensemble_from_document(pair_document)
    assert e.profile.ranks == (1, 1)
    np.testing.assert_allclose(e.states[1], np.full((2, 2), 0.5))


def test_unsorted_ranks_need_a_profile():
    """A rank-one state listed before a rank-two one cannot be inferred."""
    doc = ensemble_to_document(random_ensemble(RankProfile((2, 1)), 1))
    del doc["metadata"]
    doc["states"].reverse()
    with pytest.raises(ProfileMismatch):
        ensemble_from_document(doc)


def test_profile_must_fit_dimension(pair_document):
    """A profile whose ranks do not add up to dim is rejected."""
    pair_document["metadata"] = {"profile": [2, 1]}
    with pytest.raises(ProfileMismatch):
        ensemble_from_document(pair_document)


def test_non_square_matrix_is_rejected(pair_document):
    """Non-square density matrices raise ShapeMismatch."""
    pair_document["states"][0]["rho"] = [[[1, 0], [0, 0]]]
    with pytest.raises(ShapeMismatch):
        ensemble_from_document(pair_document)


def test_matrix_of_wrong_dimension_is_rejected():
    """A matrix of the wrong size for dim is rejected."""
    with pytest.raises(ShapeMismatch, match="document dim"):
        matrix_from_json(matrix_to_json(np.eye(3)), "rho", 2)


def test_bad_entry_is_rejected(pair_document):
    """Entries must be [re, im] pairs of numbers."""
    pair_document["states"][1]["rho"][0][1] = ["x", 0]
    with pytest.raises(InvalidDocument, match=r"states\[1\].rho\[0\]\[1\]"):
        ensemble_from_document(pair_document)


def test_missing_keys_are_rejected(pair_document):
    """Missing required keys are named in the error."""
    del pair_document["dim"]
    with pytest.raises(InvalidDocument, match="dim"):
        ensemble_from_document(pair_document)
    with pytest.raises(InvalidDocument, match="'p'"):
        ensemble_from_document({"dim": 2, "states": [{"rho": []}]})


def test_invalid_ensemble_names_failed_check(pair_document):
    """Priors summing to 0.9 fail membership."""
    pair_document["states"][0]["p"] = 0.4
    with pytest.raises(InvalidEnsemble, match="prior_normalization"):
        ensemble_from_document(pair_document)


def test_invalid_json():
    """Unparseable text raises InvalidDocument."""
    with pytest.raises(InvalidDocument, match="Invalid JSON"):
        loads("{not json")


def test_povm_round_trip(qutrit_triple):
    """A measurement document decodes to the same elements and profile."""
    povm = solve_ensemble(qutrit_triple).povm
    back = povm_from_document(loads(dumps(povm_to_document(povm))))
    assert back.profile == povm.profile
    for a, b in zip(back.elements, povm.elements):
        np.testing.assert_array_equal(a, b)


def test_povm_from_solution_document_keeps_profile(random_21):
    """A solution document carries the measurement and its profile."""
    result = solve_ensemble(random_21)
    doc = solution_to_document(result, check_optimal(random_21, result.povm))
    assert doc["method"] == "newton"
    assert doc["certificate"]["passed"] is True
    povm = povm_from_document(loads(dumps(doc)))
    assert povm.profile.ranks == (2, 1)
    assert check_optimal(random_21, povm).passed


def test_povm_from_bare_list_infers_profile():
    """A bare list of elements gets its profile from the element ranks."""
    povm = povm_from_document([matrix_to_json(np.diag([1.0, 0.0])), matrix_to_json(np.diag([0.0, 1.0]))])
    assert povm.profile.ranks == (1, 1)


def test_error_document():
    """Library errors report their class name, other errors their type."""
    assert error_document(ShapeMismatch("bad shape")) == {"error": {"kind": "ShapeMismatch", "detail": "bad shape"}}
    assert error_document(ValueError("nope"))["error"]["kind"] == "ValueError"


def test_profile_list():
    """Repeated --profile flags parse into rank profiles."""
    assert [p.ranks for p in profile_list(["2,1", " ", "1,1,1"])] == [(2, 1), (1, 1, 1)]
