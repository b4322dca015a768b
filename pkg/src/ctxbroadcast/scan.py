"""Noise-grid scans of the pseudo-broadcasting programs, with CSV and SVG output."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .catalog import mazurek
from .errors import ArgumentError
from .feasibility import (
    ContextualityWitness,
    SolveConfig,
    Status,
    WitnessError,
    assemble_pseudo,
    extract_witness,
    solve,
)
from .objects import NoiseSetting, Scenario

CSV_HEADER = ["mu", "eta", "n", "status", "residual_or_gap", "witness_value"]
COLORS = {Status.FEASIBLE: "#2e9e44", Status.INFEASIBLE: "#d0312d", Status.INDETERMINATE: "#9a9a9a"}


def fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.12g}"


def grid(step: float) -> np.ndarray:
    """Points ``0, step, 2 step, ...`` up to 1 inclusive, rounded to 12 decimals."""
    if not 0.0 < step <= 1.0:
        raise ArgumentError(f"grid step {step} outside (0, 1]")
    count = int(np.floor(1.0 / step + 1e-9))
    pts = np.round(np.arange(count + 1) * step, 12)
    if pts[-1] < 1.0 - 1e-12:
        pts = np.append(pts, 1.0)
    return pts


@dataclass(frozen=True)
class RegionRow:
    mu: float
    eta: float
    n: int
    status: Status
    max_primal_residual: float
    certificate_gap: float
    witness_value: float | None = None
    farkas_conflict: bool = False

    @property
    def residual_or_gap(self) -> float:
        return self.certificate_gap if self.status is Status.INFEASIBLE else self.max_primal_residual


@dataclass(eq=False)
class RegionTable:
    rows: list[RegionRow]
    witnesses: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def status(self, mu: float, eta: float, n: int) -> Status:
        return self._index()[(round(mu, 12), round(eta, 12), n)].status

    def _index(self) -> dict:
        return {(round(r.mu, 12), round(r.eta, 12), r.n): r for r in self.rows}

    def for_n(self, n: int) -> list[RegionRow]:
        return [r for r in self.rows if r.n == n]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([fmt(r.mu), fmt(r.eta), r.n, r.status.value, fmt(r.residual_or_gap), fmt(r.witness_value)])
        return buf.getvalue()

    def to_svg(self, cell: int = 10) -> str:
        return region_svg(self, cell)


def scan(
    mu_grid: Iterable[float],
    eta_grid: Iterable[float],
    n_list: Sequence[int],
    config: SolveConfig | None = None,
    *,
    scenario: Scenario | None = None,
    witnesses: bool = True,
    compare_without_tp: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> RegionTable:
    """Solve the 1 -> n program at every ``(mu, eta, n)``; rows sorted by mu, eta, n.

    Indeterminate points are recorded, never fatal.  With
    ``compare_without_tp`` each point is re-solved without the explicit
    trace-preservation rows and disagreements are listed in
    ``diagnostics["tp_disagreements"]``.
    """
    config = config or SolveConfig()
    scenario = scenario or mazurek()
    mus = sorted(float(m) for m in mu_grid)
    etas = sorted(float(e) for e in eta_grid)
    ns = sorted(int(n) for n in n_list)
    for v in mus + etas:
        if not 0.0 <= v <= 1.0:
            raise ArgumentError(f"grid value {v} outside [0, 1]")
    if any(n < 1 or n > 4 for n in ns):
        raise ArgumentError(f"n values must lie in 1..4, got {ns}")

    rows, found, tp_diff = [], {}, []
    total = len(mus) * len(etas) * len(ns)
    done = 0
    for mu in mus:
        for eta in etas:
            noise = NoiseSetting(mu, eta)
            for n in ns:
                problem = assemble_pseudo(scenario, n, noise)
                report = solve(problem, config)
                wval = None
                if witnesses and report.status is Status.INFEASIBLE:
                    try:
                        w = extract_witness(report, problem, config)
                    except WitnessError:
                        w = None
                    if w is not None:
                        found[(mu, eta, n)] = w
                        wval = w.violation
                rows.append(
                    RegionRow(
                        mu, eta, n, report.status, report.max_primal_residual,
                        report.certificate_gap, wval, report.farkas_conflict,
                    )
                )
                if compare_without_tp:
                    alt = solve(assemble_pseudo(scenario, n, noise, include_tp=False), config)
                    if alt.status is not report.status:
                        tp_diff.append((mu, eta, n, report.status.value, alt.status.value))
                done += 1
                if progress is not None:
                    progress(done, total)
    table = RegionTable(rows, found)
    if compare_without_tp:
        table.diagnostics["tp_disagreements"] = tp_diff
    return table


def transitions(table: RegionTable, n: int) -> dict[float, tuple[float | None, float | None]]:
    """Per mu: (largest Feasible eta, smallest Infeasible eta)."""
    out: dict[float, tuple[float | None, float | None]] = {}
    for mu in sorted({r.mu for r in table.for_n(n)}):
        col = [r for r in table.for_n(n) if r.mu == mu]
        feas = [r.eta for r in col if r.status is Status.FEASIBLE]
        inf = [r.eta for r in col if r.status is Status.INFEASIBLE]
        out[mu] = (max(feas) if feas else None, min(inf) if inf else None)
    return out


def region_svg(table: RegionTable, cell: int = 10) -> str:
    """One panel per n; x is mu, y is eta (increasing upward)."""
    ns = sorted({r.n for r in table.rows})
    mus = sorted({r.mu for r in table.rows})
    etas = sorted({r.eta for r in table.rows})
    margin, gap = 40, 30
    pw, ph = cell * len(mus), cell * len(etas)
    width = margin + len(ns) * (pw + gap) + 150
    height = margin * 2 + ph
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    xi = {m: i for i, m in enumerate(mus)}
    yi = {e: i for i, e in enumerate(etas)}
    for p, n in enumerate(ns):
        x0 = margin + p * (pw + gap)
        parts.append(f'<text x="{x0}" y="{margin - 8}">1-&gt;{n} pseudo-broadcasting</text>')
        for r in table.for_n(n):
            x = x0 + xi[r.mu] * cell
            y = margin + ph - (yi[r.eta] + 1) * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{COLORS[r.status]}">'
                f"<title>mu={fmt(r.mu)} eta={fmt(r.eta)} {r.status.value}</title></rect>"
            )
        parts.append(f'<text x="{x0}" y="{margin + ph + 14}">mu: 0 .. 1</text>')
        parts.append(
            f'<text x="{x0 - 6}" y="{margin + ph}" transform="rotate(-90 {x0 - 6} {margin + ph})">eta: 0 .. 1</text>'
        )
    lx = margin + len(ns) * (pw + gap)
    for i, (status, label) in enumerate(
        [(Status.FEASIBLE, "pseudo-broadcastable"), (Status.INFEASIBLE, "contextual"), (Status.INDETERMINATE, "indeterminate")]
    ):
        y = margin + i * 18
        parts.append(f'<rect x="{lx}" y="{y}" width="12" height="12" fill="{COLORS[status]}"/>')
        parts.append(f'<text x="{lx + 18}" y="{y + 10}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
