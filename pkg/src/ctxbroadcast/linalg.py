"""Dense Hermitian linear algebra on finite-dimensional Hilbert spaces.

Operators are plain ``numpy`` complex arrays of shape ``(d, d)``.  Tensor
factorizations are tuples of local dimensions, e.g. ``(2, 2, 2)`` for three
qubits, with factor 0 the leftmost Kronecker factor.
"""

from __future__ import annotations

import warnings
from functools import lru_cache, reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, HermiticityWarning, ShapeError

HERMITIAN_TOL = 1e-12
HERMITIAN_WARN = 1e-9
HERMITIAN_REJECT = 1e-6
CLUSTER_GAP = 1e-8


def hermitian_deviation(a: np.ndarray) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)))


def as_hermitian(a, name: str | None = None) -> np.ndarray:
    """Validate a square matrix and return its Hermitian part.

    Deviations up to ``1e-9`` are absorbed silently, up to ``1e-6`` with a
    :class:`HermiticityWarning`; anything larger is rejected.
    """
    arr = np.array(a, dtype=complex)
    label = f" {name!r}" if name else ""
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ShapeError(f"operator{label} must be a nonempty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"operator{label} has non-finite entries")
    dev = hermitian_deviation(arr)
    scale = max(1.0, float(np.max(np.abs(arr))))
    if dev > HERMITIAN_REJECT * scale:
        raise ArgumentError(f"operator{label} is not Hermitian (deviation {dev:.3g})")
    if dev > HERMITIAN_WARN:
        warnings.warn(
            f"operator{label} symmetrized, deviation {dev:.3g}", HermiticityWarning, stacklevel=2
        )
    if dev > 0:
        arr = 0.5 * (arr + arr.conj().T)
    return arr


def kron_n(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of ``factors`` in list order."""
    factors = list(factors)
    if not factors:
        raise ArgumentError("kron_n needs at least one factor")
    return reduce(np.kron, (np.asarray(f, dtype=complex) for f in factors))


def partial_trace(op: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    The kept factors appear in ascending index order in the result.
    """
    dims = tuple(int(d) for d in dims)
    if not dims or any(d <= 0 for d in dims):
        raise ArgumentError(f"invalid factor dimensions {dims}")
    op = np.asarray(op)
    total = int(np.prod(dims))
    if op.shape != (total, total):
        raise ShapeError(f"operator shape {op.shape} does not match factorization {dims}")
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ArgumentError("keep must be a nonempty set of factor indices")
    if keep[0] < 0 or keep[-1] >= len(dims):
        raise ArgumentError(f"keep {keep} out of range for {len(dims)} factors")

    n = len(dims)
    tensor = op.reshape(dims + dims)
    row = list(range(n))
    col = [n + i for i in range(n)]
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = [row[i] for i in keep] + [col[i] for i in keep]
    reduced = np.einsum(tensor, row + col, out)
    kept = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(kept, kept)


def eig_hermitian(op: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and matching orthonormal eigenvector columns.

    Within a degenerate cluster the vectors are an arbitrary orthonormal basis;
    use :func:`cluster_projector` rather than individual vectors there.
    """
    h = as_hermitian(op)
    vals, vecs = np.linalg.eigh(h)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def cluster_projector(vecs: np.ndarray, vals: np.ndarray, lower: float) -> np.ndarray:
    """Projector onto the span of eigenvectors with eigenvalue >= ``lower``."""
    sel = vecs[:, vals >= lower]
    return sel @ sel.conj().T


def operator_norm(op: np.ndarray) -> float:
    vals, _ = eig_hermitian(op)
    return float(np.max(np.abs(vals)))


def is_psd(op: np.ndarray, tol: float = 1e-9) -> bool:
    vals, _ = eig_hermitian(op)
    return bool(vals[-1] >= -tol)


def min_eigenvalue(op: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(as_hermitian(op))[0])


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    """Operator norm of ``[a, b]`` (the commutator of Hermitians is anti-Hermitian)."""
    c = a @ b - b @ a
    return float(np.linalg.norm(c, 2))


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


class HermitianBasis:
    """Orthonormal basis of the d x d Hermitian matrices under ``tr(XY)``.

    Ordering: ``I/sqrt(d)``, the ``d - 1`` diagonal generalized Gell-Mann
    matrices, the symmetric off-diagonal ones, then the antisymmetric ones
    (off-diagonal pairs in row-major upper-triangle order).  Coordinates are
    computed by index arithmetic, so the basis matrices are only materialized
    on request.
    """

    def __init__(self, dim: int):
        if dim <= 0:
            raise ArgumentError("basis dimension must be positive")
        self.dim = int(dim)
        d = self.dim
        self._rows, self._cols = np.triu_indices(d, 1)
        # diagonal Gell-Mann coefficients: row l (1..d-1) has 1 on [0, l) and -l at l
        diag = np.zeros((d, d))
        diag[0, :] = 1.0 / np.sqrt(d)
        for ell in range(1, d):
            diag[ell, :ell] = 1.0
            diag[ell, ell] = -float(ell)
            diag[ell] /= np.sqrt(ell * (ell + 1))
        self._diag = diag

    def __len__(self) -> int:
        return self.dim * self.dim

    @property
    def elements(self) -> np.ndarray:
        """The basis as an array of shape ``(d*d, d, d)``."""
        return self.decoordinatize(np.eye(len(self)))

    def coordinatize(self, ops: np.ndarray) -> np.ndarray:
        """Real coordinates ``tr(B_k X)``; accepts a single operator or a stack."""
        ops = np.asarray(ops)
        d = self.dim
        if ops.shape[-2:] != (d, d):
            raise ShapeError(f"expected trailing shape {(d, d)}, got {ops.shape}")
        diag = np.real(np.diagonal(ops, axis1=-2, axis2=-1)) @ self._diag.T
        upper = ops[..., self._rows, self._cols]
        lower = ops[..., self._cols, self._rows]
        sym = np.real(upper + lower) / np.sqrt(2.0)
        asym = np.real(1j * (upper - lower)) / np.sqrt(2.0)
        return np.concatenate([diag, sym, asym], axis=-1)

    def decoordinatize(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        d = self.dim
        if coords.shape[-1] != d * d:
            raise ShapeError(f"expected {d * d} coordinates, got {coords.shape[-1]}")
        lead = coords.shape[:-1]
        out = np.zeros(lead + (d, d), dtype=complex)
        diag = coords[..., :d] @ self._diag
        idx = np.arange(d)
        out[..., idx, idx] = diag
        m = len(self._rows)
        sym = coords[..., d : d + m] / np.sqrt(2.0)
        asym = coords[..., d + m :] / np.sqrt(2.0)
        out[..., self._rows, self._cols] = sym - 1j * asym
        out[..., self._cols, self._rows] = sym + 1j * asym
        return out


@lru_cache(maxsize=16)
def hermitian_basis(dim: int) -> HermitianBasis:
    return HermitianBasis(dim)


def coordinatize(op: np.ndarray, basis: HermitianBasis | None = None) -> np.ndarray:
    op = np.asarray(op)
    basis = basis or hermitian_basis(op.shape[-1])
    if basis.dim != op.shape[-1]:
        raise ShapeError(f"basis dim {basis.dim} does not match operator dim {op.shape[-1]}")
    return basis.coordinatize(op)


def decoordinatize(coords: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    return basis.decoordinatize(coords)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))
