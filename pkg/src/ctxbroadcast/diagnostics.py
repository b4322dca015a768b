"""Structural tests: commutativity, norm-1 structure, post-processing, repeatable models."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ArgumentError, ShapeError
from .feasibility import (
    ConicProblem,
    ConstraintLabel,
    FeasibilityReport,
    FullObservables,
    FullStateSpace,
    SolveConfig,
    Status,
    assemble_broadcast,
    solve,
)
from .linalg import (
    cluster_projector,
    commutator_norm,
    eig_hermitian,
    hermitian_basis,
    projector,
)
from .objects import NoncontextualModel, Povm, State

NORM1_TOL = 1e-7
COMMUTE_TOL = 1e-8


@dataclass(frozen=True)
class CommutationReport:
    max_norm: float
    worst_pair: tuple[int, int] | None
    is_commutative: bool


def commutation_report(ops: Sequence[np.ndarray], tol: float = COMMUTE_TOL) -> CommutationReport:
    """Largest pairwise commutator norm ``||[A, B]||`` over ``ops``."""
    ops = [getattr(o, "op", o) for o in ops]
    ops = [np.asarray(o) for o in ops]
    if len({o.shape for o in ops}) > 1:
        raise ShapeError("operators differ in dimension")
    worst, pair = 0.0, None
    for i, j in itertools.combinations(range(len(ops)), 2):
        c = commutator_norm(ops[i], ops[j])
        if pair is None or c > worst:
            worst, pair = c, (i, j)
    return CommutationReport(worst, pair, worst <= tol)


@dataclass(eq=False)
class Norm1Decomposition:
    """``G_l = P_l + F_l`` with mutually orthogonal projectors ``P_l``."""

    projective_parts: list[np.ndarray]
    residual_parts: list[np.ndarray]
    eigen_vectors: list[np.ndarray]


class NotNorm1(ArgumentError):
    def __init__(self, index: int, norm: float):
        super().__init__(f"effect {index} has operator norm {norm:.12g} < 1")
        self.index = index
        self.norm = norm


class DeltaViolation(ArgumentError):
    """Eigenvalue-1 subspaces of different effects overlap beyond tolerance."""


def norm1_decompose(povm: Povm, tol: float = NORM1_TOL) -> Norm1Decomposition:
    projectors, residuals, vectors = [], [], []
    for k, g in enumerate(povm.matrices):
        vals, vecs = eig_hermitian(g)
        if vals[0] < 1.0 - tol:
            raise NotNorm1(k, float(vals[0]))
        projectors.append(cluster_projector(vecs, vals, 1.0 - tol))
        residuals.append(g - projectors[-1])
        # first cluster vector; eigh ordering makes this deterministic
        vectors.append(vecs[:, 0])
    for i, j in itertools.combinations(range(len(projectors)), 2):
        overlap = float(np.linalg.norm(projectors[i] @ projectors[j], 2))
        if overlap > tol:
            raise DeltaViolation(f"eigenvalue-1 spaces of effects {i} and {j} overlap ({overlap:.3g})")
    for i, g in enumerate(povm.matrices):
        for j, v in enumerate(vectors):
            value = float(np.real(v.conj() @ g @ v))
            if abs(value - (1.0 if i == j else 0.0)) > max(tol, 1e-9):
                raise DeltaViolation(f"<{j}|G_{i}|{j}> = {value:.6g}")
    return Norm1Decomposition(projectors, residuals, vectors)


def is_rank_one_povm(povm: Povm, tol: float = 1e-9) -> bool:
    for g in povm.matrices:
        vals, _ = eig_hermitian(g)
        count = int(np.sum(vals > tol))
        if count > 1:
            return False
    return True


def merge_parallel_effects(povm: Povm, tol: float = 1e-9) -> Povm:
    """Coarse-grain a rank-1 POVM by summing effects with the same support ray.

    A rank-1 POVM is a post-processing of a norm-1 POVM exactly when this
    merged POVM is itself norm-1.
    """
    if not is_rank_one_povm(povm, tol):
        raise ArgumentError(f"{povm.name} is not rank-1")
    groups: list[tuple[np.ndarray, np.ndarray]] = []
    for g in povm.matrices:
        vals, vecs = eig_hermitian(g)
        if vals[0] <= tol:
            continue
        ray = projector(vecs[:, 0])
        for idx, (r, acc) in enumerate(groups):
            if np.max(np.abs(r - ray)) <= 1e-7:
                groups[idx] = (r, acc + g)
                break
        else:
            groups.append((ray, g.copy()))
    return Povm.from_matrices([acc for _, acc in groups], f"{povm.name}/merged")


@dataclass(eq=False)
class StochasticPostprocessing:
    """Row-stochastic ``p(k|l)``: rows are mother outcomes, columns target outcomes."""

    matrix: np.ndarray

    def apply(self, mother: Povm) -> list[np.ndarray]:
        return [sum(self.matrix[l, k] * g for l, g in enumerate(mother.matrices)) for k in range(self.matrix.shape[1])]


class PostprocessingInfeasible(ArgumentError):
    def __init__(self, target: int, report: FeasibilityReport):
        super().__init__(f"target {target} is not a post-processing of the mother POVM")
        self.target = target
        self.report = report


class SolverIndeterminate(RuntimeError):
    def __init__(self, report: FeasibilityReport):
        super().__init__("solver reached neither a feasible point nor a certificate")
        self.report = report


def postprocessing_problem(target: Povm, mother: Povm) -> ConicProblem:
    if target.dim != mother.dim:
        raise ShapeError(f"target dim {target.dim} != mother dim {mother.dim}")
    basis = hermitian_basis(mother.dim)
    g = basis.coordinatize(np.stack(mother.matrices))  # (L, d^2)
    a = basis.coordinatize(np.stack(target.matrices))  # (K, d^2)
    nl, nk, nb = len(g), len(a), g.shape[1]
    nv = nl * nk
    rows, rhs, labels = [], [], []
    for lam in range(nl):
        row = np.zeros(nv)
        row[lam * nk : (lam + 1) * nk] = 1.0
        rows.append(row)
        rhs.append(1.0)
        labels.append(ConstraintLabel("row_sum", lam))
    for k in range(nk):
        for j in range(nb):
            row = np.zeros(nv)
            row[np.arange(nl) * nk + k] = g[:, j]
            rows.append(row)
            rhs.append(a[k, j])
            labels.append(ConstraintLabel("operator", k, (j,)))
    return ConicProblem(
        nv, np.array(rows), np.array(rhs), np.eye(nv),
        labels, [ConstraintLabel("p>=0", i) for i in range(nv)],
        context={"kind": "postprocessing", "shape": (nl, nk)},
    )


def postprocessing_lp(
    targets: Sequence[Povm], mother: Povm, config: SolveConfig | None = None
) -> list[StochasticPostprocessing]:
    """Find ``p(k|l) >= 0`` with ``A_k = sum_l p(k|l) G_l`` for every target."""
    out = []
    for i, target in enumerate(targets):
        problem = postprocessing_problem(target, mother)
        report = solve(problem, config)
        if report.status is Status.INFEASIBLE:
            raise PostprocessingInfeasible(i, report)
        if report.status is Status.INDETERMINATE:
            raise SolverIndeterminate(report)
        p = np.clip(report.primal.reshape(problem.context["shape"]), 0.0, None)
        out.append(StochasticPostprocessing(p))
    return out


def repeatable_model(povm: Povm, tol: float = NORM1_TOL) -> NoncontextualModel:
    """Measure-and-prepare model ``A -> sum_l <l|A|l> G_l`` that fixes a norm-1 POVM."""
    try:
        dec = norm1_decompose(povm, tol)
    except NotNorm1 as exc:
        raise ArgumentError(f"repeatable model needs a norm-1 POVM: {exc}") from exc
    states = tuple(State(projector(v), f"|lambda_{k}>") for k, v in enumerate(dec.eigen_vectors))
    return NoncontextualModel(povm, states)


class StateVerdict(str, Enum):
    NON_CONTEXTUAL = "NonContextualSubset"
    CONTEXTUAL = "EnablesContextualityProof"


@dataclass(eq=False)
class StateClassification:
    verdict: StateVerdict
    commutation: CommutationReport
    broadcast: FeasibilityReport | None = None

    @property
    def agrees(self) -> bool | None:
        if self.broadcast is None or self.broadcast.status is Status.INDETERMINATE:
            return None
        feasible = self.broadcast.status is Status.FEASIBLE
        return feasible == (self.verdict is StateVerdict.NON_CONTEXTUAL)


def classify_states(
    states: Sequence[State],
    tol: float = COMMUTE_TOL,
    *,
    cross_validate: bool = False,
    config: SolveConfig | None = None,
) -> StateClassification:
    """Commuting state sets are exactly those without a contextuality proof.

    With ``cross_validate`` the 1 -> 2 broadcasting SDP against all
    observables is solved as well; see :attr:`StateClassification.agrees`.
    """
    states = list(states)
    if not states:
        raise ArgumentError("need at least one state")
    comm = commutation_report([s.op for s in states], tol)
    verdict = StateVerdict.NON_CONTEXTUAL if comm.is_commutative else StateVerdict.CONTEXTUAL
    report = None
    if cross_validate:
        d = states[0].dim
        report = solve(assemble_broadcast(states, [FullObservables(d)], 2), config)
    return StateClassification(verdict, comm, report)


def measurement_broadcast(
    povms: Sequence[Povm], n: int = 2, config: SolveConfig | None = None
) -> FeasibilityReport:
    """Solve the broadcasting SDP of the full state space against ``povms`` on every leg."""
    povms = list(povms)
    return solve(assemble_broadcast(FullStateSpace(povms[0].dim), [povms], n), config)
