"""States, effects, POVMs, measure-and-prepare models and scenarios."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ArgumentError, ShapeError, UnsupportedDimension
from .linalg import as_hermitian, eig_hermitian, operator_norm

log = logging.getLogger(__name__)

PSD_TOL = 1e-9
CLAMP_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def bloch_operator(x: float, y: float, z: float, weight: float = 1.0) -> np.ndarray:
    """``weight/2 * (I + x X + y Y + z Z)``."""
    return 0.5 * weight * (I2 + x * SX + y * SY + z * SZ)


def bloch_vector(op: np.ndarray) -> np.ndarray:
    op = np.asarray(op)
    return np.real([np.trace(op @ SX), np.trace(op @ SY), np.trace(op @ SZ)])


@dataclass(frozen=True, eq=False)
class State:
    op: np.ndarray
    name: str = "rho"

    def __post_init__(self):
        object.__setattr__(self, "op", as_hermitian(self.op, self.name))

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def violations(self) -> list[str]:
        vals, _ = eig_hermitian(self.op)
        out = []
        if vals[-1] < -PSD_TOL:
            out.append(f"state {self.name}: positivity violated, min eigenvalue {vals[-1]:.6g}")
        tr = float(np.trace(self.op).real)
        if abs(tr - 1.0) > PSD_TOL:
            out.append(f"state {self.name}: trace {tr:.12g}, residual {abs(tr - 1.0):.6g}")
        return out


@dataclass(frozen=True, eq=False)
class Effect:
    op: np.ndarray
    name: str = "E"

    def __post_init__(self):
        object.__setattr__(self, "op", as_hermitian(self.op, self.name))

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def violations(self) -> list[str]:
        vals, _ = eig_hermitian(self.op)
        out = []
        if vals[-1] < -PSD_TOL:
            out.append(f"effect {self.name}: positivity violated, min eigenvalue {vals[-1]:.6g}")
        if vals[0] > 1.0 + PSD_TOL:
            out.append(f"effect {self.name}: exceeds identity, max eigenvalue {vals[0]:.6g}")
        return out


@dataclass(frozen=True, eq=False)
class Povm:
    effects: tuple[Effect, ...]
    name: str = "M"

    def __post_init__(self):
        effects = tuple(self.effects)
        if not effects:
            raise ArgumentError(f"POVM {self.name} has no effects")
        dims = {e.dim for e in effects}
        if len(dims) != 1:
            raise ShapeError(f"POVM {self.name} mixes dimensions {sorted(dims)}")
        object.__setattr__(self, "effects", effects)

    @classmethod
    def from_matrices(cls, mats: Sequence[np.ndarray], name: str = "M") -> "Povm":
        return cls(tuple(Effect(m, f"{name}[{k}]") for k, m in enumerate(mats)), name)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    @property
    def matrices(self) -> list[np.ndarray]:
        return [e.op for e in self.effects]

    def __len__(self) -> int:
        return len(self.effects)

    def normalization_residual(self) -> float:
        total = sum(self.matrices)
        return operator_norm(total - np.eye(self.dim))

    def violations(self) -> list[str]:
        out = [v for e in self.effects for v in e.violations()]
        res = self.normalization_residual()
        if res > PSD_TOL:
            out.append(f"povm {self.name}: normalization violated, residual {res:.6g}")
        return out


@dataclass(frozen=True, eq=False)
class NoncontextualModel:
    """Response POVM ``{G_l}`` with epistemic states ``{sigma_l}``.

    Read as a channel this is the measure-and-prepare map
    ``rho -> sum_l tr(rho G_l) sigma_l``.  With ``subtheory`` set, the
    epistemic operators only need unit trace; positivity is then a property
    of the scenario they are used with.
    """

    response_povm: Povm
    epistemic_states: tuple[State, ...]
    subtheory: bool = False

    def __post_init__(self):
        states = tuple(self.epistemic_states)
        object.__setattr__(self, "epistemic_states", states)
        if len(states) != len(self.response_povm):
            raise ArgumentError(
                f"{len(states)} epistemic states for {len(self.response_povm)} response effects"
            )
        if any(s.dim != self.response_povm.dim for s in states):
            raise ShapeError("epistemic states and response POVM differ in dimension")

    @property
    def dim(self) -> int:
        return self.response_povm.dim

    def violations(self) -> list[str]:
        if self.subtheory:
            return [
                f"state {s.name}: trace {np.trace(s.op).real:.12g}"
                for s in self.epistemic_states
                if abs(np.trace(s.op).real - 1.0) > PSD_TOL
            ]
        out = self.response_povm.violations()
        for s in self.epistemic_states:
            out.extend(s.violations())
        return out


@dataclass(frozen=True)
class NoiseSetting:
    """Dephasing strength ``mu`` on preparations, visibility ``eta`` on effects."""

    mu: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        for label, v in (("mu", self.mu), ("eta", self.eta)):
            if not 0.0 <= v <= 1.0:
                raise ArgumentError(f"{label}={v} outside [0, 1]")


@dataclass(frozen=True, eq=False)
class Scenario:
    dim: int
    preparations: tuple[State, ...]
    measurements: tuple[Povm, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "preparations", tuple(self.preparations))
        object.__setattr__(self, "measurements", tuple(self.measurements))

    @property
    def effects(self) -> list[Effect]:
        return [e for m in self.measurements for e in m.effects]

    def effect_keys(self) -> list[tuple[str, int]]:
        return [(m.name, k) for m in self.measurements for k in range(len(m))]


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch {a.shape} vs {b.shape}")


def _op(x) -> np.ndarray:
    return x.op if isinstance(x, (State, Effect)) else np.asarray(x)


def clamp_probability(p: float, label: str = "") -> float:
    if p < -CLAMP_TOL or p > 1.0 + CLAMP_TOL:
        raise ArgumentError(f"probability {p:.12g} out of range {label}".rstrip())
    if p < 0.0:
        log.debug("clamped probability %.3g to 0 %s", p, label)
        return 0.0
    if p > 1.0:
        log.debug("clamped probability %.3g to 1 %s", p, label)
        return 1.0
    return p


def trace_product(a, b) -> float:
    """Real ``tr(a b)`` for Hermitian ``a``, ``b`` without clamping."""
    a, b = _op(a), _op(b)
    _check_dims(a, b)
    return float(np.real(np.sum(a * b.T)))


def born(state, effect) -> float:
    """``tr(rho E)`` clamped to [0, 1]; float noise within 1e-9 is absorbed."""
    return clamp_probability(trace_product(state, effect))


def dephase(rho: np.ndarray, mu: float) -> np.ndarray:
    rho = np.asarray(rho)
    return mu * rho + (1.0 - mu) * np.diag(np.diag(rho))


def depolarize(e: np.ndarray, eta: float) -> np.ndarray:
    # unital form; equals eta*E + (1-eta)*I/2 on trace-one effects
    e = np.asarray(e)
    return eta * e + (1.0 - eta) * np.trace(e).real / 2.0 * np.eye(2)


def apply_noise(target, setting: NoiseSetting):
    """Dephasing (states) or depolarizing (effects, POVMs, scenarios) on a qubit."""
    if isinstance(target, Scenario):
        return noisy_scenario(target, setting)
    if isinstance(target, Povm):
        return Povm(tuple(apply_noise(e, setting) for e in target.effects), target.name)
    if not isinstance(target, (State, Effect)):
        raise ArgumentError(f"cannot apply noise to {type(target).__name__}")
    if target.dim != 2:
        raise UnsupportedDimension(f"noise channels are defined for qubits, got dim {target.dim}")
    if isinstance(target, State):
        return State(dephase(target.op, setting.mu), target.name)
    return Effect(depolarize(target.op, setting.eta), target.name)


def noisy_scenario(scenario: Scenario, setting: NoiseSetting | None) -> Scenario:
    if setting is None:
        return scenario
    meta = dict(scenario.metadata)
    meta.update(mu=repr(setting.mu), eta=repr(setting.eta))
    return Scenario(
        scenario.dim,
        tuple(apply_noise(s, setting) for s in scenario.preparations),
        tuple(apply_noise(m, setting) for m in scenario.measurements),
        meta,
    )


def mp_heisenberg(model: NoncontextualModel, a) -> np.ndarray:
    """Heisenberg-picture action ``A -> sum_l tr(sigma_l A) G_l``."""
    a = _op(a)
    if a.shape != (model.dim, model.dim):
        raise ShapeError(f"operator shape {a.shape} does not match model dim {model.dim}")
    out = np.zeros_like(a, dtype=complex)
    for sigma, g in zip(model.epistemic_states, model.response_povm.effects):
        out = out + trace_product(sigma.op, a) * g.op
    return out


def mp_channel(model: NoncontextualModel, rho) -> np.ndarray:
    """Schroedinger-picture action ``rho -> sum_l tr(rho G_l) sigma_l``."""
    rho = _op(rho)
    out = np.zeros_like(rho, dtype=complex)
    for sigma, g in zip(model.epistemic_states, model.response_povm.effects):
        out = out + trace_product(rho, g.op) * sigma.op
    return out


def ontological_probability(model: NoncontextualModel, state, povm: Povm, outcome: int) -> float:
    """``sum_l tr(rho G_l) tr(sigma_l M_k)``."""
    if not 0 <= outcome < len(povm):
        raise ArgumentError(f"outcome {outcome} invalid for POVM of size {len(povm)}")
    rho = _op(state)
    mk = povm.effects[outcome].op
    _check_dims(rho, mk)
    _check_dims(rho, model.response_povm.effects[0].op)
    p = sum(
        trace_product(rho, g.op) * trace_product(sigma.op, mk)
        for sigma, g in zip(model.epistemic_states, model.response_povm.effects)
    )
    return float(p)


def validate(scenario: Scenario) -> list[str]:
    """All invariant violations of ``scenario``; empty iff it is valid."""
    report = []
    if not scenario.preparations:
        report.append("scenario has no preparations")
    if not scenario.measurements:
        report.append("scenario has no measurements")
    for s in scenario.preparations:
        if s.dim != scenario.dim:
            report.append(f"state {s.name}: dim {s.dim} != scenario dim {scenario.dim}")
        else:
            report.extend(s.violations())
    for m in scenario.measurements:
        if m.dim != scenario.dim:
            report.append(f"povm {m.name}: dim {m.dim} != scenario dim {scenario.dim}")
        else:
            report.extend(m.violations())
    return report


# --- scenario files -------------------------------------------------------


def matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ArgumentError("matrix must be a nested [[[re, im], ...], ...] list")
    return arr[..., 0] + 1j * arr[..., 1]


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "dim": scenario.dim,
        "preparations": [{"name": s.name, "matrix": matrix_to_json(s.op)} for s in scenario.preparations],
        "measurements": [
            {"name": m.name, "effects": [matrix_to_json(e.op) for e in m.effects]}
            for m in scenario.measurements
        ],
        "metadata": {str(k): str(v) for k, v in scenario.metadata.items()},
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        dim = int(data["dim"])
        preps = [State(matrix_from_json(p["matrix"]), str(p["name"])) for p in data["preparations"]]
        meas = [
            Povm.from_matrices([matrix_from_json(e) for e in m["effects"]], str(m["name"]))
            for m in data["measurements"]
        ]
    except (KeyError, TypeError) as exc:
        raise ArgumentError(f"malformed scenario: missing or invalid field {exc}") from exc
    if dim <= 0:
        raise ArgumentError("scenario dim must be positive")
    return Scenario(dim, tuple(preps), tuple(meas), dict(data.get("metadata", {})))


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=1), encoding="utf-8")


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ArgumentError(f"{path}: top level must be an object")
    return scenario_from_dict(data)
