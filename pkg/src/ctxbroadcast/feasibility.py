"""Pseudo-broadcasting and broadcasting feasibility programs.

Every program is stated over real coordinates ``x`` of a Hermitian operator
(see :class:`~ctxbroadcast.linalg.HermitianBasis`)::

    A x = b,    F x >= 0,    optionally  X(x) >= 0 (PSD)

and solved through the phase-1 program ``min t`` subject to ``A x = b``,
``F x + t >= 0`` and ``X + t I >= 0``.  Its optimum ``t*`` is the smallest
uniform violation; the dual optimum is a Farkas certificate
``(y >= 0, S >= 0, z)`` with ``F^T y + s = A^T z``, ``sum y + tr S = 1`` and
``b.z = -t*``.  Any feasible ``x`` would give ``b.z = y.Fx + <S, X> >= 0``,
so ``b.z < 0`` proves infeasibility.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .errors import ArgumentError, ShapeError, SizeError
from .linalg import hermitian_basis, kron_n
from .objects import NoiseSetting, Povm, Scenario, State, born, noisy_scenario, trace_product

log = logging.getLogger(__name__)

DEFAULT_CAP = 64


class Status(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    INDETERMINATE = "Indeterminate"


class ConstraintLabel(NamedTuple):
    kind: str
    prep: int | None = None
    effects: tuple[int, ...] = ()
    leg: int | None = None


@dataclass(frozen=True)
class SolveConfig:
    feas_tol: float = 1e-7
    cert_tol: float = 1e-6
    max_iter: int = 10000

    def __post_init__(self):
        if self.feas_tol <= 0 or self.cert_tol <= 0 or self.max_iter <= 0:
            raise ArgumentError("tolerances and max_iter must be positive")


class FullStateSpace:
    """Marker: constrain marginals on all of ``L(H)`` instead of listed states."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __repr__(self) -> str:
        return f"FullStateSpace({self.dim})"


class FullObservables:
    """Marker: every Hermitian operator acts as a test effect on this leg."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __repr__(self) -> str:
        return f"FullObservables({self.dim})"


@dataclass(eq=False)
class ConicProblem:
    variable_dim: int
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    nonneg_matrix: np.ndarray
    eq_labels: list
    nonneg_labels: list
    psd_dim: int | None = None
    factor_dims: tuple[int, ...] | None = None
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.variable_dim
        self.eq_matrix = np.asarray(self.eq_matrix, dtype=float).reshape(-1, n)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        self.nonneg_matrix = np.asarray(self.nonneg_matrix, dtype=float).reshape(-1, n)
        if len(self.eq_rhs) != len(self.eq_matrix):
            raise ShapeError("equality rows and right-hand sides differ in number")
        if len(self.eq_labels) != len(self.eq_matrix) or len(self.nonneg_labels) != len(self.nonneg_matrix):
            raise ShapeError("every constraint needs a label")
        if self.psd_dim is not None and self.psd_dim**2 != n:
            raise ShapeError(f"PSD block of dim {self.psd_dim} needs {self.psd_dim ** 2} coordinates")

    @property
    def equalities(self) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.eq_matrix, self.eq_rhs))

    @property
    def nonnegatives(self) -> list[np.ndarray]:
        return list(self.nonneg_matrix)

    @property
    def has_psd(self) -> bool:
        return self.psd_dim is not None

    @property
    def operator_dim(self) -> int | None:
        if self.psd_dim is not None:
            return self.psd_dim
        if self.factor_dims is not None:
            return int(np.prod(self.factor_dims))
        return None

    def operator(self, x: np.ndarray) -> np.ndarray:
        dim = self.operator_dim
        if dim is None:
            raise ArgumentError("problem variable is not an operator")
        return hermitian_basis(dim).decoordinatize(x)

    def residual(self, x: np.ndarray) -> float:
        """Largest violation of any constraint at ``x`` (0 when satisfied)."""
        x = np.asarray(x, dtype=float)
        parts = [0.0]
        if len(self.eq_rhs):
            parts.append(float(np.max(np.abs(self.eq_matrix @ x - self.eq_rhs))))
        if len(self.nonneg_matrix):
            parts.append(float(max(0.0, -np.min(self.nonneg_matrix @ x))))
        if self.has_psd:
            parts.append(max(0.0, -float(np.linalg.eigvalsh(self.operator(x))[0])))
        return max(parts)


@dataclass(eq=False)
class Certificate:
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray | None
    stationarity: float
    gap: float


@dataclass(eq=False)
class FeasibilityReport:
    status: Status
    primal: np.ndarray | None
    certificate: Certificate | None
    max_primal_residual: float
    certificate_gap: float
    diagnostics: dict = field(default_factory=dict)
    problem: ConicProblem | None = field(default=None, repr=False)

    @property
    def farkas_conflict(self) -> bool:
        return bool(self.diagnostics.get("farkas_conflict", False))

    def primal_operator(self) -> np.ndarray | None:
        if self.primal is None or self.problem is None:
            return None
        return self.problem.operator(self.primal)

    def to_dict(self) -> dict:
        out = {
            "status": self.status.value,
            "max_primal_residual": self.max_primal_residual,
            "certificate_gap": self.certificate_gap,
            "diagnostics": {k: v for k, v in self.diagnostics.items()},
        }
        if self.certificate is not None:
            out["certificate_stationarity"] = self.certificate.stationarity
        return out


# --- assembly ---------------------------------------------------------------


def _dedup(rows: np.ndarray, rhs: np.ndarray | None, labels: list, quantum: float = 1e-12):
    keep, seen = [], set()
    for i, row in enumerate(rows):
        key = np.round(row / quantum).astype(np.int64).tobytes()
        if rhs is not None:
            key += np.round(np.array([rhs[i]]) / quantum).astype(np.int64).tobytes()
        if key in seen:
            continue
        seen.add(key)
        keep.append(i)
    keep = np.array(keep, dtype=int)
    return rows[keep], (None if rhs is None else rhs[keep]), [labels[i] for i in keep]


def _check_size(d: int, n: int, cap: int) -> int:
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    total = d ** (n + 1)
    if total > cap:
        raise SizeError(f"operator dimension {d}^{n + 1} = {total} exceeds cap {cap}")
    return total


def _embed(op: np.ndarray, leg: int, n: int, d: int) -> np.ndarray:
    eye = np.eye(d)
    return kron_n([op if i == leg else eye for i in range(n)])


def assemble_pseudo(
    scenario: Scenario,
    n: int,
    noise: NoiseSetting | None = None,
    *,
    cap: int = DEFAULT_CAP,
    include_tp: bool = True,
    dedup: bool = True,
) -> ConicProblem:
    """1 -> n pseudo-broadcasting program for the scenario's states and effects.

    The variable is the map operator ``W`` on ``n + 1`` legs, leg 0 pairing
    with the preparation.  Constraints: positivity of
    ``tr(W [rho_t (x) E_1 (x) ... (x) E_n])`` over all effect tuples, the
    single-leg marginals reproducing ``tr(rho_t E)``, and (by default)
    ``tr(W [rho_t (x) I ...]) = 1``.
    """
    scen = noisy_scenario(scenario, noise)
    d = scen.dim
    total = _check_size(d, n, cap)
    basis = hermitian_basis(total)
    preps = [s.op for s in scen.preparations]
    effects = [e.op for e in scen.effects]
    if not preps or not effects:
        raise ArgumentError("scenario needs at least one preparation and one effect")
    k = len(effects)
    out_dim = d**n

    tuples = list(itertools.product(range(k), repeat=n))
    eff_stack = np.stack([kron_n([effects[i] for i in tup]) for tup in tuples])
    nonneg_rows, nonneg_labels = [], []
    for t, rho in enumerate(preps):
        ops = np.einsum("ab,kcd->kacbd", rho, eff_stack).reshape(len(tuples), total, total)
        nonneg_rows.append(basis.coordinatize(ops))
        nonneg_labels.extend(ConstraintLabel("positivity", t, tup) for tup in tuples)
    nonneg = np.concatenate(nonneg_rows)

    probs = np.array([[born(rho, e) for e in effects] for rho in preps])
    eq_ops, eq_rhs, eq_labels = [], [], []
    for t, rho in enumerate(preps):
        for e, eff in enumerate(effects):
            for leg in range(n):
                eq_ops.append(np.kron(rho, _embed(eff, leg, n, d)))
                eq_rhs.append(probs[t, e])
                eq_labels.append(ConstraintLabel("marginal", t, (e,), leg))
        if include_tp:
            eq_ops.append(np.kron(rho, np.eye(out_dim)))
            eq_rhs.append(float(np.trace(rho).real))
            eq_labels.append(ConstraintLabel("tp", t))
    eq = basis.coordinatize(np.stack(eq_ops))
    eq_rhs = np.array(eq_rhs)

    if dedup:
        nonneg, _, nonneg_labels = _dedup(nonneg, None, nonneg_labels)
        eq, eq_rhs, eq_labels = _dedup(eq, eq_rhs, eq_labels)

    context = {
        "kind": "pseudo",
        "n": n,
        "prep_names": [s.name for s in scen.preparations],
        "effect_keys": scen.effect_keys(),
        "probabilities": probs,
        "noise": noise,
    }
    return ConicProblem(
        total * total, eq, eq_rhs, nonneg, eq_labels, nonneg_labels,
        psd_dim=None, factor_dims=(d,) * (n + 1), context=context,
    )


def _leg_effects(item, d: int) -> list[np.ndarray]:
    if isinstance(item, FullObservables):
        return list(hermitian_basis(d).elements)
    if isinstance(item, Povm):
        return item.matrices
    out = []
    for povm in item:
        out.extend(_leg_effects(povm, d))
    return out


def assemble_broadcast(
    states,
    measurement_sets: Sequence,
    n: int,
    *,
    cap: int = DEFAULT_CAP,
) -> ConicProblem:
    """Completely positive 1 -> n broadcasting program over the Choi operator.

    ``states`` is a list of :class:`State` (marginals fixed on their span) or a
    :class:`FullStateSpace`.  ``measurement_sets`` holds one entry per output
    leg, each a list of POVMs or a :class:`FullObservables`; a single entry is
    reused on every leg.
    """
    if isinstance(states, FullStateSpace):
        d = states.dim
        inputs = list(hermitian_basis(d).elements)
    else:
        states = list(states)
        if not states:
            raise ArgumentError("need at least one state")
        inputs = [s.op if isinstance(s, State) else np.asarray(s) for s in states]
        d = inputs[0].shape[0]
    sets = list(measurement_sets)
    if len(sets) == 1:
        sets = sets * n
    if len(sets) != n:
        raise ArgumentError(f"need 1 or {n} measurement sets, got {len(sets)}")
    total = _check_size(d, n, cap)
    basis = hermitian_basis(total)
    out_dim = d**n

    eq_ops, eq_rhs, eq_labels = [], [], []
    for k, b in enumerate(hermitian_basis(d).elements):
        eq_ops.append(np.kron(b, np.eye(out_dim)))
        eq_rhs.append(float(np.trace(b).real))
        eq_labels.append(ConstraintLabel("tp", k))
    for leg, item in enumerate(sets):
        effects = _leg_effects(item, d)
        for e, eff in enumerate(effects):
            if eff.shape != (d, d):
                raise ShapeError(f"effect of dim {eff.shape[0]} on a dim-{d} problem")
            lifted = _embed(eff, leg, n, d)
            for t, rho in enumerate(inputs):
                eq_ops.append(np.kron(rho.T, lifted))
                eq_rhs.append(trace_product(rho, eff))
                eq_labels.append(ConstraintLabel("marginal", t, (e,), leg))
    eq = basis.coordinatize(np.stack(eq_ops))
    eq, rhs, labels = _dedup(eq, np.array(eq_rhs), eq_labels)
    return ConicProblem(
        total * total, eq, rhs, np.zeros((0, total * total)), labels, [],
        psd_dim=total, factor_dims=(d,) * (n + 1), context={"kind": "broadcast", "n": n},
    )


# --- solving ----------------------------------------------------------------


def _linear_inconsistency(problem: ConicProblem, tol: float) -> Certificate | None:
    a, b = problem.eq_matrix, problem.eq_rhs
    if not len(b):
        return None
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    r = b - a @ x
    norm1 = float(np.sum(np.abs(r)))
    if float(np.max(np.abs(r))) <= tol:
        return None
    z = -r / norm1
    y = np.zeros(len(problem.nonneg_matrix))
    stat = float(np.max(np.abs(a.T @ z))) if a.size else 0.0
    return Certificate(y, z, None, stat, float(-(b @ z)))


def _row_space(problem: ConicProblem) -> np.ndarray | None:
    stacked = np.vstack([problem.eq_matrix, problem.nonneg_matrix])
    if stacked.shape[0] == 0:
        return None
    _, sv, vt = scipy.linalg.svd(stacked, full_matrices=False, lapack_driver="gesvd")
    rank = int(np.sum(sv > sv[0] * 1e-12))
    if rank >= problem.variable_dim:
        return None
    return vt[:rank].T


def _solve_lp(problem: ConicProblem, config: SolveConfig):
    q = _row_space(problem)
    a, f = problem.eq_matrix, problem.nonneg_matrix
    if q is not None:
        a, f = a @ q, f @ q
    nv = a.shape[1]
    m, p = len(problem.eq_rhs), len(f)
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    a_ub = np.hstack([-f, -np.ones((p, 1))]) if p else None
    b_ub = np.zeros(p) if p else None
    a_eq = np.hstack([a, np.zeros((m, 1))]) if m else None
    b_eq = problem.eq_rhs if m else None
    bounds = [(None, None)] * nv + [(0, None)]
    opts = {
        "primal_feasibility_tolerance": 1e-10,
        "dual_feasibility_tolerance": 1e-10,
        "maxiter": config.max_iter,
    }
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs", options=opts)
    if res.status != 0 or res.x is None:
        return None, None, {"solver": "highs", "solver_status": int(res.status), "message": res.message}
    u = res.x[:nv]
    x = q @ u if q is not None else u
    y = -np.asarray(res.ineqlin.marginals) if p else np.zeros(0)
    z = -np.asarray(res.eqlin.marginals) if m else np.zeros(0)
    y = np.maximum(y, 0.0)
    return x, (y, z, None), {"solver": "highs", "phase1": float(res.fun), "reduced_dim": nv}


def _solve_sdp(problem: ConicProblem, config: SolveConfig):
    import cvxpy as cp

    dim = problem.psd_dim
    basis = hermitian_basis(dim)
    # interior-point KKT systems need independent equalities: use U_r^T A x = U_r^T b
    u_r = None
    eq_matrix, eq_rhs = problem.eq_matrix, problem.eq_rhs
    if len(eq_rhs):
        u, sv, vt = np.linalg.svd(eq_matrix, full_matrices=False)
        rank = int(np.sum(sv > sv[0] * 1e-12))
        u_r = u[:, :rank]
        eq_matrix, eq_rhs = sv[:rank, None] * vt[:rank], u_r.T @ eq_rhs
    a_ops = basis.decoordinatize(eq_matrix)
    f_ops = basis.decoordinatize(problem.nonneg_matrix)
    h = cp.Variable((dim, dim), hermitian=True)
    t = cp.Variable()
    vec_h = cp.vec(h, order="C")
    cons = []
    eq_con = nn_con = None
    if len(a_ops):
        g = np.transpose(a_ops, (0, 2, 1)).reshape(len(a_ops), -1)
        eq_con = cp.real(g @ vec_h) == eq_rhs
        cons.append(eq_con)
    if len(f_ops):
        g = np.transpose(f_ops, (0, 2, 1)).reshape(len(f_ops), -1)
        nn_con = cp.real(g @ vec_h) + t >= 0
        cons.append(nn_con)
    psd_con = h + t * np.eye(dim) >> 0
    cons += [psd_con, t >= 0]
    prob = cp.Problem(cp.Minimize(t), cons)
    try:
        with warnings.catch_warnings():
            # inaccurate solutions are still checked against the constraints below
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver="CLARABEL", max_iter=config.max_iter)
    except cp.error.SolverError as exc:
        return None, None, {"solver": "clarabel", "message": str(exc)}
    diag = {"solver": "clarabel", "solver_status": prob.status, "phase1": None if t.value is None else float(t.value)}
    if h.value is None or prob.status not in ("optimal", "optimal_inaccurate"):
        return None, None, diag
    x = basis.coordinatize(h.value)
    z = u_r @ np.asarray(eq_con.dual_value).reshape(-1) if eq_con is not None else np.zeros(0)
    y = np.maximum(np.asarray(nn_con.dual_value).reshape(-1), 0.0) if nn_con is not None else np.zeros(0)
    # complex PSD duals come back at half scale (real embedding)
    s_mat = 2.0 * np.asarray(psd_con.dual_value)
    s_mat = 0.5 * (s_mat + s_mat.conj().T)
    return x, (y, z, basis.coordinatize(s_mat)), diag


def _certificate(problem: ConicProblem, y, z, s) -> Certificate:
    n = problem.variable_dim
    lhs = problem.nonneg_matrix.T @ y if len(y) else np.zeros(n)
    rhs = problem.eq_matrix.T @ z if len(z) else np.zeros(n)
    psd_violation = 0.0
    if s is not None:
        # take S from exact stationarity; shift z along A^T d = I if S dips below 0
        basis = hermitian_basis(problem.psd_dim)
        s = rhs - lhs
        eps = max(0.0, -float(np.linalg.eigvalsh(basis.decoordinatize(s))[0]))
        if eps > 0.0 and len(z):
            ident = basis.coordinatize(np.eye(problem.psd_dim))
            delta, *_ = np.linalg.lstsq(problem.eq_matrix.T, ident, rcond=None)
            if np.max(np.abs(problem.eq_matrix.T @ delta - ident)) < 1e-10:
                z = z + eps * delta
                rhs = problem.eq_matrix.T @ z
                s = rhs - lhs
        psd_violation = max(0.0, -float(np.linalg.eigvalsh(basis.decoordinatize(s))[0]))
        lhs = lhs + s
    stat = float(np.max(np.abs(lhs - rhs))) if n else 0.0
    stat = max(stat, psd_violation)
    gap = float(-(problem.eq_rhs @ z)) if len(z) else 0.0
    return Certificate(y, z, s, stat, gap)


def solve(problem: ConicProblem, config: SolveConfig | None = None) -> FeasibilityReport:
    """Decide feasibility; never guesses when neither side is established."""
    config = config or SolveConfig()
    cert = _linear_inconsistency(problem, config.feas_tol)
    if cert is not None:
        status = Status.INFEASIBLE if cert.gap >= config.cert_tol else Status.INDETERMINATE
        return FeasibilityReport(
            status, None, cert, float("inf"), cert.gap,
            {"solver": "lstsq", "reason": "linearly inconsistent equalities"}, problem,
        )

    if problem.has_psd:
        x, duals, diag = _solve_sdp(problem, config)
    else:
        x, duals, diag = _solve_lp(problem, config)
    if x is None:
        diag["reason"] = "solver failure"
        return FeasibilityReport(Status.INDETERMINATE, None, None, float("inf"), 0.0, diag, problem)

    residual = problem.residual(x)
    cert = _certificate(problem, *duals)
    primal_ok = residual <= config.feas_tol
    cert_ok = cert.gap >= config.cert_tol and cert.stationarity <= config.feas_tol
    diag["farkas_conflict"] = bool(primal_ok and cert.gap >= config.cert_tol)
    if diag["farkas_conflict"]:
        log.warning("primal residual %.3g and certificate gap %.3g both pass", residual, cert.gap)
        status = Status.INDETERMINATE
    elif primal_ok:
        status = Status.FEASIBLE
    elif cert_ok:
        status = Status.INFEASIBLE
    else:
        status = Status.INDETERMINATE
    return FeasibilityReport(
        status,
        x,
        cert,
        residual,
        cert.gap,
        diag,
        problem,
    )


# --- witnesses --------------------------------------------------------------


@dataclass(eq=False)
class ContextualityWitness:
    """Linear inequality ``sum c[prep, povm, outcome] p(outcome | prep, povm) <= bound``.

    Every scenario whose pseudo-broadcasting program is feasible satisfies
    it; ``value_on_scenario`` is its value on the source data.
    """

    coefficients: dict
    bound: float
    value_on_scenario: float
    raw: dict = field(default_factory=dict)

    @property
    def violation(self) -> float:
        return self.value_on_scenario - self.bound

    def evaluate(self, scenario: Scenario) -> float:
        preps = {s.name: s for s in scenario.preparations}
        povms = {m.name: m for m in scenario.measurements}
        total = 0.0
        for (prep, povm, outcome), c in self.coefficients.items():
            total += c * born(preps[prep], povms[povm].effects[outcome])
        return total

    def violation_on(self, scenario: Scenario) -> float:
        return self.evaluate(scenario) - self.bound

    def to_dict(self) -> dict:
        return {
            "coefficients": [
                {"prep": k[0], "povm": k[1], "outcome": k[2], "coefficient": v}
                for k, v in self.coefficients.items()
            ],
            "bound": self.bound,
            "value_on_scenario": self.value_on_scenario,
        }


class WitnessError(RuntimeError):
    """The certificate does not yield a witness violated by at least ``cert_tol``."""


def extract_witness(
    report: FeasibilityReport,
    problem: ConicProblem | None = None,
    config: SolveConfig | None = None,
) -> ContextualityWitness:
    """Turn the equality multipliers of a Farkas certificate into an inequality."""
    config = config or SolveConfig()
    if report.status is not Status.INFEASIBLE or report.certificate is None:
        raise ArgumentError(f"witness needs an Infeasible report, got {report.status.value}")
    problem = problem or report.problem
    z = report.certificate.z
    ctx = problem.context if problem is not None else {}
    raw = {"y": report.certificate.y, "z": z, "gap": report.certificate.gap}

    if ctx.get("kind") != "pseudo":
        const = float(problem.eq_rhs @ z) if len(z) else 0.0
        return ContextualityWitness({}, const, 0.0, raw)

    probs = ctx["probabilities"]
    weights: dict[tuple[int, int], float] = {}
    const = 0.0
    for label, zj, cj in zip(problem.eq_labels, z, problem.eq_rhs):
        if label.kind == "marginal":
            key = (label.prep, label.effects[0])
            weights[key] = weights.get(key, 0.0) + zj
        else:
            const += zj * cj
    scale = max((abs(w) for w in weights.values()), default=0.0) or 1.0
    prep_names, effect_keys = ctx["prep_names"], ctx["effect_keys"]
    coefficients = {}
    value = 0.0
    for (t, e), w in sorted(weights.items()):
        c = -w / scale
        coefficients[(prep_names[t], effect_keys[e][0], effect_keys[e][1])] = c
        value += c * probs[t, e]
    witness = ContextualityWitness(coefficients, const / scale, value, raw)
    if witness.violation < config.cert_tol:
        raise WitnessError(
            f"normalized witness violation {witness.violation:.3g} below cert_tol {config.cert_tol:.3g}"
        )
    return witness
