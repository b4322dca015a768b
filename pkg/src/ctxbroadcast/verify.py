"""Assertions over the built-in examples, shared by ``examples --verify``."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import catalog
from .diagnostics import commutation_report, measurement_broadcast, norm1_decompose
from .feasibility import FullStateSpace, Status, assemble_broadcast, assemble_pseudo, solve
from .linalg import coordinatize, ket, projector, random_density_matrix
from .objects import NoiseSetting, born, mp_channel, mp_heisenberg


def _check(name: str, ok: bool, detail: str, emit: Callable[[str], None], failures: list) -> None:
    emit(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if not ok:
        failures.append(name)


def run_verification(cfg, emit: Callable[[str], None] = print) -> list[str]:
    """Run every example check; return the names of the failing ones."""
    failures: list[str] = []
    sc = cfg.solve_config
    rng = np.random.default_rng(cfg.seed)

    # five-dimensional norm-1 example
    model = catalog.norm1_model(0.5)
    res = max(
        float(np.max(np.abs(mp_heisenberg(model, e) - e))) for e in model.response_povm.matrices
    )
    _check("5dim", res <= 1e-12, f"5dim fixed-point residual ≤ 1e-12 (got {res:.3g})", emit, failures)
    worst = 0.0
    for a in (0.25, 0.5, 0.75):
        e = catalog.norm1_example(a).matrices
        worst = max(worst, abs(commutation_report([e[1], e[2]]).max_norm - a * (1 - a) / 2))
    _check("5dim-commutator", worst <= 1e-10, f"||[E2,E3]|| = a(1-a)/2 within 1e-10 (err {worst:.3g})", emit, failures)
    dec = norm1_decompose(catalog.norm1_example(0.5))
    want = [projector(ket(k, 5)) for k in (2, 3, 4)]
    err = max(float(np.max(np.abs(p - q))) for p, q in zip(dec.projective_parts, want))
    _check("5dim-norm1", err <= 1e-9, f"projective parts |2>,|3>,|4> (err {err:.3g})", emit, failures)
    rho = random_density_matrix(5, rng)
    out = mp_channel(model, rho)
    err = abs(np.trace(out).real - 1.0)
    _check("5dim-channel", err <= 1e-10, f"measure-and-prepare channel is trace preserving (err {err:.3g})", emit, failures)

    # SIC example
    scen = catalog.sic_qubit()
    for n in range(1, 5):
        xi = catalog.sic_xi(n)
        problem = assemble_pseudo(scen, n)
        res = problem.residual(coordinatize(xi.operator))
        _check(f"SIC-Xi{n}", res <= 1e-10, f"SIC Ξ{_sub(n)} residual ≤ 1e-10 (got {res:.3g})", emit, failures)
    report = measurement_broadcast([catalog.sic_povm()], 2, sc)
    _check(
        "SIC-broadcast",
        report.status is Status.INFEASIBLE and report.certificate_gap >= 1e-6,
        f"SIC broadcast SDP {report.status.value}, gap {report.certificate_gap:.3g}",
        emit, failures,
    )

    # qutrit non-disturbing pair
    q = catalog.qutrit_nondisturb()
    report = solve(assemble_broadcast(FullStateSpace(3), [list(q.measurements)], 2), sc)
    _check("qutrit-pair", report.status is Status.INFEASIBLE, f"broadcast SDP {report.status.value}, gap {report.certificate_gap:.3g}", emit, failures)

    # Mazurek scenario
    worst = 0.0
    for mu, eta in rng.uniform(0, 1, size=(10, 2)):
        value = catalog.mazurek_inequality_value(catalog.mazurek(mu, eta))
        worst = max(worst, abs(value - (3 + 1.5 * eta * (1 + mu))))
    _check("mazurek-closed-form", worst <= 1e-10, f"inequality value 3 + 3eta(1+mu)/2 (err {worst:.3g})", emit, failures)
    clean = catalog.mazurek()
    preps = {s.name: s for s in clean.preparations}
    err = max(
        abs(born(preps[f"s{m.name[1]}{b}"], e) - (1.0 if b == bp else 0.0))
        for m in clean.measurements for b in (0, 1) for bp, e in enumerate(m.effects)
    )
    _check("mazurek-perfect-correlation", err <= 1e-12, f"tr(sigma_tb M_tb') = delta_bb' (err {err:.3g})", emit, failures)
    for mu, eta, want in ((1.0, 1.0, Status.INFEASIBLE), (0.0, 0.9, Status.FEASIBLE), (1.0, 0.6, Status.FEASIBLE)):
        report = solve(assemble_pseudo(clean, 3, NoiseSetting(mu, eta)), sc)
        _check(
            f"mazurek-n3-({mu:g},{eta:g})",
            report.status is want,
            f"1->3 program {report.status.value}, expected {want.value}",
            emit, failures,
        )
    return failures


def _sub(n: int) -> str:
    return "".join("₀₁₂₃₄₅₆₇₈₉"[int(c)] for c in str(n))
