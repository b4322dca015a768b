"""Built-in scenarios, POVMs and maps used throughout the tests and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError
from .linalg import ket, kron_n, projector
from .maps import PseudoMap
from .objects import (
    SX,
    SZ,
    I2,
    NoiseSetting,
    NoncontextualModel,
    Povm,
    Scenario,
    State,
    noisy_scenario,
)

SQRT3_2 = np.sqrt(3.0) / 2.0

# Bloch (x, z) of sigma_{t,b} = M_{t,b}; six directions pi/3 apart in the x-z plane
MAZUREK_BLOCH = {
    (1, 0): (0.0, 1.0),
    (1, 1): (0.0, -1.0),
    (2, 0): (SQRT3_2, -0.5),
    (2, 1): (-SQRT3_2, 0.5),
    (3, 0): (-SQRT3_2, -0.5),
    (3, 1): (SQRT3_2, 0.5),
}


def _xz(x: float, z: float) -> np.ndarray:
    return 0.5 * (I2 + x * SX + z * SZ)


def mazurek(mu: float | None = None, eta: float | None = None) -> Scenario:
    """Six x-z plane preparations and three binary measurements.

    Preparation ``sigma_t,b`` is named ``"s{t}{b}"``; measurement ``t`` is
    ``"M{t}"`` with outcome ``b``.  Passing ``mu``/``eta`` applies dephasing to
    the preparations and depolarizing noise to the effects.
    """
    preps = [State(_xz(*MAZUREK_BLOCH[t, b]), f"s{t}{b}") for t in (1, 2, 3) for b in (0, 1)]
    meas = [
        Povm.from_matrices([_xz(*MAZUREK_BLOCH[t, b]) for b in (0, 1)], f"M{t}") for t in (1, 2, 3)
    ]
    scen = Scenario(2, tuple(preps), tuple(meas), {"example": "mazurek"})
    if mu is None and eta is None:
        return scen
    return noisy_scenario(scen, NoiseSetting(1.0 if mu is None else mu, 1.0 if eta is None else eta))


def mazurek_inequality_value(scenario: Scenario) -> float:
    """``sum_{t,b} tr(sigma_t,b M_t,b)``; at most 5 for non-contextual data."""
    from .objects import born

    preps = {s.name: s for s in scenario.preparations}
    total = 0.0
    for m in scenario.measurements:
        t = m.name[1:]
        for b, e in enumerate(m.effects):
            total += born(preps[f"s{t}{b}"], e)
    return total


def mazurek_boundary(mu: float) -> float:
    """Visibility above which the inequality is violated at dephasing ``mu``."""
    return 4.0 / (3.0 * (1.0 + mu))


def sic_vectors() -> list[np.ndarray]:
    c, s = 1.0 / np.sqrt(3.0), np.sqrt(2.0 / 3.0)
    out = [np.array([1.0, 0.0], dtype=complex)]
    for k in range(3):
        out.append(np.array([c, s * np.exp(2j * np.pi * k / 3.0)], dtype=complex))
    return out


def sic_povm() -> Povm:
    return Povm.from_matrices([0.5 * projector(v) for v in sic_vectors()], "SIC")


def sic_qubit() -> Scenario:
    """The qubit SIC-POVM together with its four pure SIC states."""
    states = [State(projector(v), f"phi{i + 1}") for i, v in enumerate(sic_vectors())]
    return Scenario(2, tuple(states), (sic_povm(),), {"example": "sic_qubit"})


def sic_xi(n: int) -> PseudoMap:
    """``rho -> sum_i tr(E_i rho) (3|phi_i><phi_i| - I)^{(x)n}`` (positive on SIC tuples only)."""
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    w = 0
    for v, e in zip(sic_vectors(), sic_povm().matrices):
        w = w + kron_n([e] + [3.0 * projector(v) - I2] * n)
    return PseudoMap(np.asarray(w, dtype=complex), 2, n)


def _check_a(a: float) -> float:
    a = float(a)
    if not 0.0 < a < 1.0:
        raise ArgumentError(f"a must lie in (0, 1), got {a}")
    return a


def norm1_example(a: float = 0.5) -> Povm:
    """Non-commutative three-outcome norm-1 POVM on C^5."""
    a = _check_a(a)
    plus = projector(ket(0, 5) + ket(1, 5))
    minus = projector(ket(0, 5) - ket(1, 5))
    p = [projector(ket(i, 5)) for i in range(5)]
    e1 = p[2] + a * p[0] + (1 - a) * plus
    e2 = p[3] + a * p[1]
    e3 = p[4] + (1 - a) * minus
    return Povm.from_matrices([e1, e2, e3], "E")


def norm1_model(a: float = 0.5) -> NoncontextualModel:
    """Measure-and-prepare model ``A -> sum_z <z+1|A|z+1> E_z`` fixing the example POVM."""
    povm = norm1_example(a)
    states = tuple(State(projector(ket(z + 2, 5)), f"|{z + 2}>") for z in range(3))
    return NoncontextualModel(povm, states)


def qutrit_nondisturb() -> Scenario:
    """Binary qutrit POVMs ``A`` and ``B``: non-commuting yet non-disturbing.

    The preparation list only carries the computational basis; the pair is
    meant to be tested against the full qutrit state space.
    """
    p = [projector(ket(i, 3)) for i in range(3)]
    off = np.zeros((3, 3), dtype=complex)
    off[0, 2] = off[2, 0] = 1.0
    a1 = 0.25 * (2 * p[0] + p[2] + np.sqrt(2.0) * off)
    b1 = 0.5 * (2 * p[0] + p[2])
    eye = np.eye(3)
    meas = (Povm.from_matrices([a1, eye - a1], "A"), Povm.from_matrices([b1, eye - b1], "B"))
    states = tuple(State(p[i], f"|{i}>") for i in range(3))
    return Scenario(3, states, meas, {"example": "qutrit_nondisturb", "states": "full"})


def computational_pvm(d: int) -> Povm:
    return Povm.from_matrices([projector(ket(i, d)) for i in range(d)], f"Z{d}")


_BUILDERS = {
    "mazurek": mazurek,
    "sic_qubit": sic_qubit,
    "norm1_example": norm1_example,
    "norm1_model": norm1_model,
    "qutrit_nondisturb": qutrit_nondisturb,
    "sic_xi": sic_xi,
}


def build_example(name: str, **params):
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ArgumentError(f"unknown example {name!r}; choose from {sorted(_BUILDERS)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ArgumentError(f"invalid parameters for {name}: {exc}") from exc
