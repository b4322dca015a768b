"""Operator representations of linear maps ``L(H) -> L(H^{(x)n})``.

Two conventions live side by side:

* map operator ``W``: ``tr(W [rho (x) M_1 (x) ... (x) M_n]) = tr(Xi(rho) M_1 (x) ... (x) M_n)``,
  i.e. leg 0 contracts with the input *without* a transpose.  This is the
  variable of the pseudo-broadcasting programs.
* Choi operator ``J = sum_ij |i><j| (x) Lambda(|i><j|)``; contraction uses
  ``rho^T`` on leg 0.  ``Lambda`` is completely positive iff ``J >= 0``.

The two are related by a partial transpose of leg 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ShapeError
from .linalg import kron_n, partial_trace
from .objects import NoncontextualModel


def partial_transpose_first(op: np.ndarray, d: int) -> np.ndarray:
    op = np.asarray(op)
    rest = op.shape[0] // d
    if rest * d != op.shape[0]:
        raise ShapeError(f"operator dim {op.shape[0]} not divisible by {d}")
    t = op.reshape(d, rest, d, rest).transpose(2, 1, 0, 3)
    return t.reshape(op.shape)


def choi_to_map_operator(choi: np.ndarray, d: int) -> np.ndarray:
    return partial_transpose_first(choi, d)


def map_operator_to_choi(w: np.ndarray, d: int) -> np.ndarray:
    return partial_transpose_first(w, d)


def _apply(w: np.ndarray, rho: np.ndarray, d: int) -> np.ndarray:
    rest = w.shape[0] // d
    dims = (d, rest)
    return partial_trace(np.kron(rho, np.eye(rest)) @ w, dims, [1])


@dataclass(frozen=True, eq=False)
class PseudoMap:
    """A (not necessarily positive) linear map stored as its map operator."""

    operator: np.ndarray
    dim: int
    n: int

    def __post_init__(self):
        total = self.dim ** (self.n + 1)
        if self.operator.shape != (total, total):
            raise ShapeError(f"map operator shape {self.operator.shape}, expected {(total, total)}")

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return (self.dim,) * (self.n + 1)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return _apply(self.operator, np.asarray(rho), self.dim)

    def choi(self) -> np.ndarray:
        return map_operator_to_choi(self.operator, self.dim)

    @classmethod
    def from_choi(cls, choi: np.ndarray, dim: int, n: int) -> "PseudoMap":
        return cls(choi_to_map_operator(np.asarray(choi), dim), dim, n)

    def trace_last_leg(self) -> "PseudoMap":
        if self.n < 2:
            raise ArgumentError("cannot trace the only output leg")
        keep = list(range(self.n))
        return PseudoMap(partial_trace(self.operator, self.factor_dims, keep), self.dim, self.n - 1)


def choi_apply(choi: np.ndarray, rho: np.ndarray, d: int) -> np.ndarray:
    """``Lambda(rho) = tr_0[(rho^T (x) I) J]``."""
    return _apply(np.asarray(choi), np.asarray(rho).T, d)


def copy_channel_choi(d: int, n: int) -> np.ndarray:
    """Choi operator of ``rho -> sum_i <i|rho|i> |i><i|^{(x)n}``."""
    out = 0
    for i in range(d):
        p = np.zeros((d, d), dtype=complex)
        p[i, i] = 1.0
        out = out + kron_n([p] * (n + 1))
    return out


def copy_map(d: int, n: int) -> PseudoMap:
    return PseudoMap.from_choi(copy_channel_choi(d, n), d, n)


def measure_prepare_map(model: NoncontextualModel, n: int) -> PseudoMap:
    """``rho -> sum_l tr(rho G_l) sigma_l^{(x)n}`` as a map operator."""
    w = 0
    for g, sigma in zip(model.response_povm.effects, model.epistemic_states):
        w = w + kron_n([g.op] + [sigma.op] * n)
    return PseudoMap(np.asarray(w, dtype=complex), model.dim, n)
