"""Dense complex-matrix primitives shared by every other module.

Blocks are addressed with zero-based indices. Matrices are plain numpy arrays;
nothing here mutates its inputs.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

try:
    from .config import DEFAULT_TOL, RANK_RTOL
    from .exceptions import (
        IndexOutOfRange,
        NotHermitian,
        NotPositiveDefinite,
        NotPositiveSemidefinite,
        ProfileMismatch,
        ShapeMismatch,
    )
except ImportError:
    from config import DEFAULT_TOL, RANK_RTOL
    from exceptions import (
        IndexOutOfRange,
        NotHermitian,
        NotPositiveDefinite,
        NotPositiveSemidefinite,
        ProfileMismatch,
        ShapeMismatch,
    )

logger = logging.getLogger(__name__)

ComplexMatrix = NDArray[np.complex128]

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class RankProfile:
    """Ranks (r_1, ..., r_m) of the states of an ensemble, sorted non-increasing.

    Ties keep their input order. The space dimension is the sum of the ranks.
    """

    ranks: Tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        object.__setattr__(self, "ranks", ranks)
        if not ranks:
            raise ProfileMismatch("Rank profile must contain at least one rank")
        if any(r < 1 for r in ranks):
            raise ProfileMismatch(f"Ranks must be positive, got {ranks}")
        if any(a < b for a, b in zip(ranks, ranks[1:])):
            raise ProfileMismatch(f"Ranks must be sorted non-increasing, got {ranks}")

    @classmethod
    def parse(cls, text: str) -> "RankProfile":
        """Build a profile from a comma separated string such as ``"2,1"``."""
        try:
            ranks = tuple(int(part) for part in text.split(",") if part.strip())
        except ValueError as e:
            raise ProfileMismatch(f"Invalid rank profile '{text}': {e}") from e
        return cls(ranks)

    @property
    def dim(self) -> int:
        return sum(self.ranks)

    @property
    def m(self) -> int:
        return len(self.ranks)

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate(([0], np.cumsum(self.ranks))))

    def block_slice(self, i: int) -> slice:
        if not 0 <= i < self.m:
            raise IndexOutOfRange(f"Block {i} out of range for profile {self.ranks}")
        start = self.offsets[i]
        return slice(start, start + self.ranks[i])

    def flat_index(self, index: "BlockIndex") -> int:
        """Position of a two-tier index in the stacked ordering."""
        self.block_slice(index.block)
        if not 0 <= index.inner < self.ranks[index.block]:
            raise IndexOutOfRange(
                f"Inner index {index.inner} exceeds rank {self.ranks[index.block]} of block {index.block}"
            )
        return self.offsets[index.block] + index.inner

    def __str__(self) -> str:
        return ",".join(str(r) for r in self.ranks)


@dataclass(frozen=True)
class BlockIndex:
    """Two-tier index: state ``block`` and decomposition component ``inner``."""

    block: int
    inner: int


def hermiticity_residual(M: ComplexMatrix) -> float:
    return float(np.linalg.norm(M - M.conj().T))


def _check_square(M: ComplexMatrix) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeMismatch(f"Expected a square matrix, got shape {M.shape}")


def hermitian_eig(M: ComplexMatrix, tol: float = DEFAULT_TOL) -> Tuple[NDArray[np.float64], ComplexMatrix]:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues come back ascending. Each eigenvector is rotated so that its
    largest-magnitude component is real and positive, which makes outputs
    deterministic for a given input.

    Args:
        M: Square matrix that must be Hermitian within ``tol`` (scaled by the
            norm of ``M`` when that exceeds one).
        tol: Hermiticity tolerance.

    Returns:
        Tuple of (eigenvalues, eigenvectors as columns).

    Raises:
        ShapeMismatch: If ``M`` is not square.
        NotHermitian: If the symmetry residual exceeds the tolerance.
    """
    M = np.asarray(M, dtype=complex)
    _check_square(M)
    asym = hermiticity_residual(M)
    if asym > tol * max(1.0, float(np.linalg.norm(M))):
        raise NotHermitian(f"Matrix is not Hermitian: ||M - M^H|| = {asym:.3e} > {tol:.1e}")
    w, V = scipy.linalg.eigh(0.5 * (M + M.conj().T))
    if V.size:
        pivots = np.argmax(np.abs(V), axis=0)
        lead = V[pivots, np.arange(V.shape[1])]
        V = V * (lead.conj() / np.abs(lead))
    return w, V


def _spectral_function(V: ComplexMatrix, values: NDArray) -> ComplexMatrix:
    return (V * values) @ V.conj().T


def principal_sqrt(M: ComplexMatrix, tol: float = DEFAULT_TOL) -> ComplexMatrix:
    """Unique positive semidefinite square root of ``M``.

    Eigenvalues in ``[-tol, 0]`` are clamped to zero.

    Raises:
        NotPositiveSemidefinite: If an eigenvalue is below ``-tol``.
    """
    w, V = hermitian_eig(M, tol)
    if w.size and w[0] < -tol:
        raise NotPositiveSemidefinite(f"Smallest eigenvalue {w[0]:.3e} is below -{tol:.1e}")
    return _spectral_function(V, np.sqrt(np.clip(w, 0.0, None)))


def inverse_sqrt(M: ComplexMatrix, tol: float = DEFAULT_TOL) -> ComplexMatrix:
    """Inverse of the principal square root of a positive definite matrix."""
    w, V = hermitian_eig(M, tol)
    if w.size and w[0] <= tol * max(1.0, float(w[-1])):
        raise NotPositiveDefinite(f"Smallest eigenvalue {w[0]:.3e} is not positive")
    return _spectral_function(V, 1.0 / np.sqrt(w))


def min_eigenvalue(M: ComplexMatrix) -> float:
    """Smallest eigenvalue of the Hermitian part of ``M``."""
    M = np.asarray(M, dtype=complex)
    return float(scipy.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


def is_positive_definite(M: ComplexMatrix, tol: float = DEFAULT_TOL) -> bool:
    """True if ``M`` is Hermitian within ``tol`` and its spectrum exceeds ``tol``."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    if hermiticity_residual(M) > tol * max(1.0, float(np.linalg.norm(M))):
        return False
    return min_eigenvalue(M) > tol


def numerical_rank(M: ComplexMatrix) -> int:
    """Count singular values above ``s_max * max(shape) * RANK_RTOL``."""
    M = np.asarray(M, dtype=complex)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > s[0] * max(M.shape) * RANK_RTOL))


def column_space(M: ComplexMatrix, rank: int) -> ComplexMatrix:
    """Orthonormal basis of the dominant ``rank`` left singular vectors."""
    U, _, _ = np.linalg.svd(np.asarray(M, dtype=complex))
    return U[:, :rank]


def principal_angles(A: ComplexMatrix, B: ComplexMatrix) -> NDArray[np.float64]:
    """Principal angles (radians) between the column spaces of ``A`` and ``B``."""
    return scipy.linalg.subspace_angles(A, B)


def block_view(M: ComplexMatrix, profile: RankProfile, i: int, j: int) -> ComplexMatrix:
    """Copy of the ``r_i x r_j`` block at position ``(i, j)``.

    Raises:
        ShapeMismatch: If ``M`` is not ``n x n`` for ``n = profile.dim``.
        IndexOutOfRange: If a block index is outside the profile.
    """
    M = np.asarray(M)
    if M.shape != (profile.dim, profile.dim):
        raise ShapeMismatch(f"Matrix shape {M.shape} does not match profile dimension {profile.dim}")
    return M[profile.block_slice(i), profile.block_slice(j)].copy()


def assemble_block_diagonal(blocks: Sequence[ComplexMatrix], profile: RankProfile) -> ComplexMatrix:
    """Place ``blocks`` on the diagonal of an ``n x n`` zero matrix.

    Raises:
        ShapeMismatch: If the number of blocks or any block shape is wrong.
    """
    if len(blocks) != profile.m:
        raise ShapeMismatch(f"Expected {profile.m} blocks, got {len(blocks)}")
    out = np.zeros((profile.dim, profile.dim), dtype=complex)
    for k, block in enumerate(blocks):
        block = np.asarray(block, dtype=complex)
        r = profile.ranks[k]
        if block.shape != (r, r):
            raise ShapeMismatch(f"Block {k} has shape {block.shape}, expected {(r, r)}")
        sl = profile.block_slice(k)
        out[sl, sl] = block
    return out


def diagonal_blocks(M: ComplexMatrix, profile: RankProfile) -> List[ComplexMatrix]:
    return [block_view(M, profile, i, i) for i in range(profile.m)]


def block_diagonal_part(M: ComplexMatrix, profile: RankProfile) -> ComplexMatrix:
    """Zero every off-diagonal block of ``M``."""
    return assemble_block_diagonal(diagonal_blocks(M, profile), profile)


def is_block_diagonal(M: ComplexMatrix, profile: RankProfile, tol: float = DEFAULT_TOL) -> bool:
    return float(np.linalg.norm(M - block_diagonal_part(M, profile))) <= tol


# Hermitian coordinates. The map below is an isometry between Hermitian
# matrices under Re Tr(A B) and R^(n^2) under the dot product.

def hvec(M: ComplexMatrix) -> NDArray[np.float64]:
    """Real coordinates ``[diag, sqrt2 Re(upper), sqrt2 Im(upper)]`` of a Hermitian matrix."""
    M = np.asarray(M, dtype=complex)
    iu = np.triu_indices(M.shape[0], 1)
    return np.concatenate((M.diagonal().real, _SQRT2 * M[iu].real, _SQRT2 * M[iu].imag))


def hunvec(x: NDArray[np.float64], n: int) -> ComplexMatrix:
    """Inverse of :func:`hvec` for an ``n x n`` Hermitian matrix."""
    x = np.asarray(x, dtype=float)
    if x.size != n * n:
        raise ShapeMismatch(f"Expected {n * n} Hermitian coordinates, got {x.size}")
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    upper = np.zeros((n, n), dtype=complex)
    upper[iu] = (x[n:n + k] + 1j * x[n + k:]) / _SQRT2
    return np.diag(x[:n]).astype(complex) + upper + upper.conj().T


def block_hvec(M: ComplexMatrix, profile: RankProfile) -> NDArray[np.float64]:
    """Concatenated :func:`hvec` of the diagonal blocks (``sum r_i^2`` reals)."""
    return np.concatenate([hvec(b) for b in diagonal_blocks(M, profile)])


def block_hunvec(x: NDArray[np.float64], profile: RankProfile) -> ComplexMatrix:
    """Inverse of :func:`block_hvec`, returning a block-diagonal matrix."""
    x = np.asarray(x, dtype=float)
    sizes = [r * r for r in profile.ranks]
    if x.size != sum(sizes):
        raise ShapeMismatch(f"Expected {sum(sizes)} block coordinates, got {x.size}")
    parts = np.split(x, np.cumsum(sizes)[:-1])
    return assemble_block_diagonal([hunvec(p, r) for p, r in zip(parts, profile.ranks)], profile)


def hermitian_basis(n: int) -> List[ComplexMatrix]:
    """Basis matrices ``hunvec(e_k)`` for ``k = 0 .. n^2 - 1``."""
    eye = np.eye(n * n)
    return [hunvec(eye[k], n) for k in range(n * n)]
