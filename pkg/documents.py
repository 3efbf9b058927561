"""JSON documents for ensembles, measurements and results.

Complex entries are written as ``[re, im]`` pairs. Python's ``json`` writes
floats with ``repr``, the shortest string that parses back to the same
double, so ``parse(serialize(x)) == x`` holds exactly.
"""
import json
import logging
from typing import Any, List, Optional, Sequence

import numpy as np

try:
    from .certificates import Certificate
    from .complex_linalg import ComplexMatrix, RankProfile
    from .config import CLI_TOL
    from .ensemble import Ensemble, Povm, infer_profile, validate
    from .exceptions import InvalidDocument, InvalidEnsemble, LidmedError, ProfileMismatch, ShapeMismatch
    from .med_solver import SolveResult
except ImportError:
    from certificates import Certificate
    from complex_linalg import ComplexMatrix, RankProfile
    from config import CLI_TOL
    from ensemble import Ensemble, Povm, infer_profile, validate
    from exceptions import InvalidDocument, InvalidEnsemble, LidmedError, ProfileMismatch, ShapeMismatch
    from med_solver import SolveResult

logger = logging.getLogger(__name__)


def dumps(doc: Any) -> str:
    """Serialize with two-space indentation and a trailing newline."""
    return json.dumps(doc, indent=2) + "\n"


def loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidDocument(f"Invalid JSON: {e}") from e


def matrix_to_json(M: ComplexMatrix) -> List[List[List[float]]]:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def matrix_from_json(data: Any, name: str, dim: Optional[int] = None) -> ComplexMatrix:
    """Parse a square matrix of ``[re, im]`` pairs.

    Raises:
        InvalidDocument: If an entry is not a pair of numbers.
        ShapeMismatch: If the matrix is not square or not ``dim x dim``.
    """
    if not isinstance(data, list) or not all(isinstance(row, list) for row in data):
        raise InvalidDocument(f"{name} must be a list of rows")
    rows = len(data)
    if rows == 0 or any(len(row) != rows for row in data):
        raise ShapeMismatch(f"{name} is not square: {rows} rows with lengths {[len(r) for r in data]}")
    if dim is not None and rows != dim:
        raise ShapeMismatch(f"{name} is {rows}x{rows}, document dim is {dim}")
    out = np.empty((rows, rows), dtype=complex)
    for a, row in enumerate(data):
        for b, entry in enumerate(row):
            if not (isinstance(entry, list) and len(entry) == 2 and all(_is_number(x) for x in entry)):
                raise InvalidDocument(f"{name}[{a}][{b}] must be a [re, im] pair, got {entry!r}")
            out[a, b] = complex(entry[0], entry[1])
    return out


def _parse_profile(value: Any) -> RankProfile:
    if isinstance(value, str):
        return RankProfile.parse(value)
    if isinstance(value, list) and all(isinstance(r, int) for r in value):
        return RankProfile(tuple(value))
    raise InvalidDocument(f"profile must be a list of integers or a comma separated string, got {value!r}")


def _require(doc: Any, key: str, where: str) -> Any:
    if not isinstance(doc, dict) or key not in doc:
        raise InvalidDocument(f"{where} is missing '{key}'")
    return doc[key]


def ensemble_to_document(e: Ensemble, seed: Optional[int] = None) -> dict:
    metadata = {"profile": list(e.profile.ranks)}
    if seed is not None:
        metadata["seed"] = seed
    return {
        "dim": e.n,
        "states": [{"p": float(p), "rho": matrix_to_json(rho)} for p, rho in zip(e.priors, e.states)],
        "metadata": metadata,
    }


def ensemble_from_document(doc: Any, tol: float = CLI_TOL) -> Ensemble:
    """Parse and validate an ensemble document.

    The profile comes from ``metadata.profile`` when present and otherwise
    from the numerical ranks of the states.

    Raises:
        InvalidDocument: On structural problems.
        ShapeMismatch: If a matrix is not ``dim x dim``.
        ProfileMismatch: If the profile cannot be determined or disagrees with ``dim``.
        InvalidEnsemble: Naming the first violated membership condition.
    """
    dim = _require(doc, "dim", "ensemble document")
    if not isinstance(dim, int) or dim < 1:
        raise InvalidDocument(f"dim must be a positive integer, got {dim!r}")
    states = _require(doc, "states", "ensemble document")
    if not isinstance(states, list) or not states:
        raise InvalidDocument("states must be a non-empty list")
    priors, rhos = [], []
    for k, state in enumerate(states):
        p = _require(state, "p", f"states[{k}]")
        if not _is_number(p):
            raise InvalidDocument(f"states[{k}].p must be a number, got {p!r}")
        priors.append(float(p))
        rhos.append(matrix_from_json(_require(state, "rho", f"states[{k}]"), f"states[{k}].rho", dim))

    metadata = doc.get("metadata") or {}
    if "profile" in metadata:
        profile = _parse_profile(metadata["profile"])
    else:
        profile = infer_profile([p * rho for p, rho in zip(priors, rhos)])
        if profile is None:
            raise ProfileMismatch("States must be listed by non-increasing rank when no profile is given")
    if profile.dim != dim or profile.m != len(states):
        raise ProfileMismatch(f"Profile {profile.ranks} does not fit {len(states)} states in dimension {dim}")

    e = Ensemble(profile, np.array(priors), tuple(rhos))
    report = validate(e, tol)
    if not report.passed:
        raise InvalidEnsemble(f"Ensemble fails '{report.failures[0]}' check: {report.residuals}")
    return e


def povm_to_document(pov: Povm) -> dict:
    return {
        "dim": pov.n,
        "profile": list(pov.profile.ranks),
        "elements": [matrix_to_json(el) for el in pov.elements],
    }


def povm_from_document(doc: Any, profile: Optional[RankProfile] = None) -> Povm:
    """Parse a measurement.

    Accepts a measurement document, a solution document (its ``povm`` key)
    or a bare list of element matrices. A missing profile is taken from
    ``profile`` or from the element ranks.
    """
    if isinstance(doc, dict) and "povm" in doc:
        inner = {"elements": doc["povm"]}
        if "profile" in doc:
            inner["profile"] = doc["profile"]
        doc = inner
    if isinstance(doc, list):
        doc = {"elements": doc}
    elements_data = _require(doc, "elements", "POVM document")
    if not isinstance(elements_data, list) or not elements_data:
        raise InvalidDocument("elements must be a non-empty list")
    dim = doc.get("dim")
    elements = [matrix_from_json(el, f"elements[{k}]", dim) for k, el in enumerate(elements_data)]
    if "profile" in doc:
        profile = _parse_profile(doc["profile"])
    elif profile is None:
        profile = infer_profile(elements)
        if profile is None:
            raise ProfileMismatch("Cannot infer a sorted rank profile from the POVM elements")
    return Povm(profile, tuple(elements))


def certificate_to_document(cert: Certificate) -> dict:
    return cert.to_dict()


def solution_to_document(result: SolveResult, cert: Certificate) -> dict:
    return {
        "method": result.method,
        "povm": [matrix_to_json(el) for el in result.povm.elements],
        "profile": list(result.povm.profile.ranks),
        "p_success": result.p_success,
        "residual": result.residual,
        "iterations": result.iterations,
        "certificate": certificate_to_document(cert),
    }


def error_document(err: Exception) -> dict:
    kind = err.kind if isinstance(err, LidmedError) else type(err).__name__
    return {"error": {"kind": kind, "detail": str(err)}}


def ensembles_close(a: Ensemble, b: Ensemble, tol: float) -> bool:
    """Entry-wise comparison of priors and states in listed order."""
    if a.profile != b.profile:
        return False
    return bool(
        np.max(np.abs(a.priors - b.priors)) <= tol
        and all(np.max(np.abs(x - y)) <= tol for x, y in zip(a.states, b.states))
    )


def profile_list(profiles: Sequence[str]) -> List[RankProfile]:
    """Parse profile strings such as ``["2,1", "2,2"]``."""
    return [RankProfile.parse(p) for p in profiles if p.strip()]
