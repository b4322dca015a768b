"""Command-line entry point.

Exit codes: 0 success, 1 no witness (scenario feasible), 2 invalid input,
3 Indeterminate result in ``check``, 4 failed assertion in ``examples --verify``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import catalog
from .diagnostics import (
    NotNorm1,
    DeltaViolation,
    classify_states,
    commutation_report,
    is_rank_one_povm,
    merge_parallel_effects,
    norm1_decompose,
)
from .errors import ArgumentError, ShapeError, SizeError, UnsupportedDimension
from .feasibility import SolveConfig, Status, WitnessError, assemble_pseudo, extract_witness, solve
from .objects import NoiseSetting, born, load_scenario, validate
from .scan import grid, scan

log = logging.getLogger("ctxbroadcast")

ENV_CONFIG = "CTXBROADCAST_CONFIG"
EXIT_OK, EXIT_NO_WITNESS, EXIT_INPUT, EXIT_INDETERMINATE, EXIT_VERIFY = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    feas_tol: float = 1e-7
    cert_tol: float = 1e-6
    n_max: int = 4
    mu_step: float = 0.05
    eta_step: float = 0.02
    output_dir: str = "."
    emit_svg: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.feas_tol <= 0 or self.cert_tol <= 0:
            raise ArgumentError("tolerances must be positive")
        for step in (self.mu_step, self.eta_step):
            if not 0 < step <= 1:
                raise ArgumentError(f"grid step {step} outside (0, 1]")
        if self.n_max < 1:
            raise ArgumentError("n_max must be >= 1")

    @property
    def solve_config(self) -> SolveConfig:
        return SolveConfig(self.feas_tol, self.cert_tol)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    kind = _TYPES[key]
    if kind in ("float", float):
        return float(value)
    if kind in ("int", int):
        return int(value)
    if kind in ("bool", bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    return value


def read_config_file(path: str | os.PathLike) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgumentError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ArgumentError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value.strip("\"'"))
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Flags override the ``--config`` file, which overrides the env-named file."""
    values = {}
    env_path = os.environ.get(ENV_CONFIG)
    if env_path:
        values.update(read_config_file(env_path))
    if args.config:
        values.update(read_config_file(args.config))
    for key in _TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return RunConfig(**values)


def _num(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}") + 0.0 if np.isfinite(obj) else str(obj)
    if isinstance(obj, (np.floating,)):
        return _num(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _num(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_num(v) for v in obj]
    if isinstance(obj, Status):
        return obj.value
    return obj


def _dump(payload) -> str:
    return json.dumps(_num(payload), indent=2, sort_keys=True) + "\n"


def _write(cfg: RunConfig, args, command: str, ext: str, text: str) -> Path:
    tag = args.tag or time.strftime("%Y%m%dT%H%M%S")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{command}-{tag}.{ext}"
    path.write_text(text, encoding="utf-8")
    return path


def _load_valid(path: str):
    if not Path(path).is_file():
        raise ArgumentError(f"no such file: {path}")
    scenario = load_scenario(path)
    problems = validate(scenario)
    if problems:
        raise ArgumentError("invalid scenario:\n  " + "\n  ".join(problems))
    return scenario


def _noise(args) -> NoiseSetting | None:
    if args.mu is None and args.eta is None:
        return None
    return NoiseSetting(1.0 if args.mu is None else args.mu, 1.0 if args.eta is None else args.eta)


def _check_n(n: int, cfg: RunConfig) -> None:
    if not 1 <= n <= cfg.n_max:
        raise ArgumentError(f"n={n} outside 1..{cfg.n_max}")


# --- subcommands --------------------------------------------------------------


def cmd_scan(args, cfg: RunConfig) -> int:
    if args.scenario != "mazurek":
        raise ArgumentError(f"unknown scenario family {args.scenario!r}")
    ns = [int(v) for v in args.n.split(",") if v.strip()]
    for n in ns:
        _check_n(n, cfg)
    table = scan(
        grid(cfg.mu_step), grid(cfg.eta_step), ns, cfg.solve_config,
        compare_without_tp=args.tp_diagnostic,
    )
    path = _write(cfg, args, "scan", "csv", table.to_csv())
    print(f"wrote {path} ({len(table.rows)} rows)")
    if cfg.emit_svg:
        print(f"wrote {_write(cfg, args, 'scan', 'svg', table.to_svg())}")
    if args.tp_diagnostic:
        diff = table.diagnostics["tp_disagreements"]
        print(f"points whose status changes without TP rows: {len(diff)}")
    return EXIT_OK


def cmd_check(args, cfg: RunConfig) -> int:
    scenario = _load_valid(args.file)
    _check_n(args.n, cfg)
    report = solve(assemble_pseudo(scenario, args.n, _noise(args)), cfg.solve_config)
    payload = report.to_dict()
    payload["n"] = args.n
    text = _dump(payload)
    print(text, end="")
    _write(cfg, args, "check", "json", text)
    return EXIT_INDETERMINATE if report.status is Status.INDETERMINATE else EXIT_OK


def diagnose_scenario(scenario) -> dict:
    states = classify_states(scenario.preparations)
    names = [s.name for s in scenario.preparations]
    out = {
        "validation": validate(scenario),
        "states": {
            "verdict": states.verdict.value,
            "max_commutator_norm": states.commutation.max_norm,
            "worst_pair": None if states.commutation.worst_pair is None
            else [names[i] for i in states.commutation.worst_pair],
        },
        "measurements": [],
    }
    effects = commutation_report([e.op for e in scenario.effects])
    out["effects_commutative"] = effects.is_commutative
    out["effects_max_commutator_norm"] = effects.max_norm
    for m in scenario.measurements:
        entry = {"name": m.name, "rank_one": is_rank_one_povm(m)}
        try:
            dec = norm1_decompose(m)
            entry["norm1"] = {"ok": True, "projective_ranks": [int(round(np.trace(p).real)) for p in dec.projective_parts]}
        except NotNorm1 as exc:
            entry["norm1"] = {"ok": False, "index": exc.index, "norm": exc.norm}
        except DeltaViolation as exc:
            entry["norm1"] = {"ok": False, "delta_violation": str(exc)}
        if entry["rank_one"]:
            try:
                norm1_decompose(merge_parallel_effects(m))
                entry["norm1_postprocessing"] = True
            except (NotNorm1, DeltaViolation):
                entry["norm1_postprocessing"] = False
        entry["commutative"] = commutation_report(m.matrices).is_commutative
        out["measurements"].append(entry)
    out["probabilities"] = [
        {"prep": s.name, "povm": m.name, "outcome": k, "p": born(s, e)}
        for s in scenario.preparations
        for m in scenario.measurements
        for k, e in enumerate(m.effects)
    ]
    return out


def cmd_diagnose(args, cfg: RunConfig) -> int:
    scenario = load_scenario(args.file) if Path(args.file).is_file() else None
    if scenario is None:
        raise ArgumentError(f"no such file: {args.file}")
    text = _dump(diagnose_scenario(scenario))
    print(text, end="")
    _write(cfg, args, "diagnose", "json", text)
    return EXIT_OK


def cmd_witness(args, cfg: RunConfig) -> int:
    scenario = _load_valid(args.file)
    _check_n(args.n, cfg)
    problem = assemble_pseudo(scenario, args.n, _noise(args))
    report = solve(problem, cfg.solve_config)
    if report.status is not Status.INFEASIBLE:
        print(f"no witness: status {report.status.value}", file=sys.stderr)
        return EXIT_INDETERMINATE if report.status is Status.INDETERMINATE else EXIT_NO_WITNESS
    try:
        w = extract_witness(report, problem, cfg.solve_config)
    except WitnessError as exc:
        print(f"no witness: {exc}", file=sys.stderr)
        return EXIT_NO_WITNESS
    payload = w.to_dict()
    payload.update(n=args.n, violation=w.violation)
    text = _dump(payload)
    print(text, end="")
    _write(cfg, args, "witness", "json", text)
    return EXIT_OK


def cmd_examples(args, cfg: RunConfig) -> int:
    from .verify import run_verification

    failures = run_verification(cfg, print)
    if not args.verify:
        return EXIT_OK
    return EXIT_VERIFY if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"key=value config file (env {ENV_CONFIG} is read first)")
    common.add_argument("--feas-tol", dest="feas_tol", type=float)
    common.add_argument("--cert-tol", dest="cert_tol", type=float)
    common.add_argument("--n-max", dest="n_max", type=int)
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--tag", help="output file suffix (default: timestamp)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ctxbroadcast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", parents=[common], help="noise-grid region scan")
    p.add_argument("--scenario", default="mazurek")
    p.add_argument("--n", default="2,3", help="comma separated list, e.g. 2,3")
    p.add_argument("--mu-step", dest="mu_step", type=float)
    p.add_argument("--eta-step", dest="eta_step", type=float)
    p.add_argument("--svg", dest="emit_svg", action="store_const", const=True)
    p.add_argument("--tp-diagnostic", action="store_true", help="also solve without TP rows")
    p.set_defaults(func=cmd_scan)

    for name, func, helptext in (
        ("check", cmd_check, "pseudo-broadcasting feasibility report"),
        ("witness", cmd_witness, "contextuality witness from an infeasible program"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--file", required=True)
        p.add_argument("--n", type=int, default=2)
        p.add_argument("--mu", type=float, help="dephase preparations (qubit only)")
        p.add_argument("--eta", type=float, help="depolarize effects (qubit only)")
        p.set_defaults(func=func)

    p = sub.add_parser("diagnose", parents=[common], help="structural report for a scenario file")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("examples", parents=[common], help="run the built-in examples")
    p.add_argument("--verify", action="store_true", help="exit 4 on any failed assertion")
    p.set_defaults(func=cmd_examples)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (ArgumentError, ShapeError, SizeError, UnsupportedDimension, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
