"""Command-line front end.

Every subcommand reads a graph and two measures (or a stored curve), runs the
matching part of the pipeline and writes JSON or CSV, either to standard
output or into ``--out DIR``. Failures print an error object on standard
error and exit with 1 (invalid input), 2 (no convergence) or 3 (failed
verification).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DocumentError, ValidationError, VerificationFailed, W1PlusError
from .geodesic import build_geodesic, entropy_profile
from .graph_core import Graph, Measure, load_graph, load_measure
from .orientation import orient
from .scaling import DEFAULT_MAX_ITER, DEFAULT_TOL, cost_kernel, minimize_J
from .serialization import curve_to_document, load_curve
from .transport import solve_transport, support_union
from .verification import Tolerances, verify
from .weights import default_weights, load_custom_weights

COMMANDS = ("w1", "orient", "weights", "couple", "geodesic", "sample", "entropy", "verify")


@dataclass
class RunConfig:
    graph: Path | None = None
    f0: Path | None = None
    f1: Path | None = None
    weights: Path | None = None
    curve: Path | None = None
    out: Path | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    grid: int = 101
    times: list[float] = field(default_factory=lambda: [0.0, 0.5, 1.0])
    tolerances: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def validate(self, command: str) -> None:
        needs_instance = command != "verify" or self.curve is None
        if command in ("sample", "entropy") and self.curve is not None:
            needs_instance = False
        if needs_instance:
            for label in ("graph", "f0", "f1"):
                if getattr(self, label) is None:
                    raise ValidationError(f"--{label} is required", option=label)
        for label in ("graph", "f0", "f1", "weights", "curve"):
            path = getattr(self, label)
            if path is not None and not path.is_file():
                raise ValidationError(f"{path}: no such file", option=label)
        if self.grid < 2:
            raise ValidationError("grid size must be at least 2", grid=self.grid)
        if not self.tol > 0:
            raise ValidationError("--tol must be positive", tol=self.tol)
        if self.max_iter < 1:
            raise ValidationError("--max-iter must be positive", max_iter=self.max_iter)
        if any(not 0.0 <= t <= 1.0 for t in self.times):
            raise ValidationError("sample times must lie in [0, 1]")
        known = {f.name for f in dataclasses.fields(Tolerances)}
        for k, v in self.tolerances.items():
            if k not in known:
                raise ValidationError(f"unknown tolerance {k!r}", tolerance=k)
            if not v > 0:
                raise ValidationError(f"tolerance {k!r} must be positive", tolerance=k)


# --- pipeline pieces ------------------------------------------------------------

def _instance(cfg: RunConfig) -> tuple[Graph, Measure, Measure]:
    g = load_graph(cfg.graph)
    return g, load_measure(g, cfg.f0), load_measure(g, cfg.f1)


def _custom(cfg: RunConfig):
    if cfg.weights is None:
        return None
    try:
        return json.loads(cfg.weights.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{cfg.weights}: {exc}") from exc


def _weights(cfg: RunConfig, og):
    custom = _custom(cfg)
    return default_weights(og) if custom is None else load_custom_weights(og, custom)


def _curve(cfg: RunConfig):
    if cfg.curve is not None:
        return load_curve(cfg.curve)
    g, f0, f1 = _instance(cfg)
    return build_geodesic(g, f0, f1, weights=_custom(cfg), tol=cfg.tol, max_iter=cfg.max_iter)


def _support(g, f0, f1):
    sol = solve_transport(g, f0, f1)
    return sol, support_union(g, f0, f1, solution=sol)


def cmd_w1(cfg: RunConfig) -> dict:
    g, f0, f1 = _instance(cfg)
    sol = solve_transport(g, f0, f1)
    return {"w1": sol.value, "coupling": sol.coupling(g).to_document()}


def cmd_orient(cfg: RunConfig) -> dict:
    g, f0, f1 = _instance(cfg)
    sol, C = _support(g, f0, f1)
    og = orient(g, C.pairs)
    doc = og.to_document()
    doc["w1"] = sol.value
    doc["support_union"] = [[g.name(x), g.name(y)] for x, y in C]
    return doc


def cmd_weights(cfg: RunConfig) -> dict:
    g, f0, f1 = _instance(cfg)
    _, C = _support(g, f0, f1)
    og = orient(g, C.pairs)
    return {"orientation": og.to_document(), "weights": _weights(cfg, og).to_document()}


def cmd_couple(cfg: RunConfig) -> dict:
    g, f0, f1 = _instance(cfg)
    sol, C = _support(g, f0, f1)
    og = orient(g, C.pairs)
    w = _weights(cfg, og)
    sr = minimize_J(cost_kernel(w, w.order, f0, f1), f0, f1, tol=cfg.tol, max_iter=cfg.max_iter)
    doc = sr.to_document()
    doc["w1"] = sol.value
    return doc


def cmd_geodesic(cfg: RunConfig) -> dict:
    return curve_to_document(_curve(cfg))


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def cmd_sample(cfg: RunConfig) -> str:
    return _csv(["t", "vertex", "mass"], _curve(cfg).sample(cfg.times))


def cmd_entropy(cfg: RunConfig) -> str:
    return _csv(["t", "entropy"], entropy_profile(_curve(cfg), np.linspace(0.0, 1.0, cfg.grid)))


# --- driver ---------------------------------------------------------------------

def _emit(cfg: RunConfig, stem: str, payload, suffix: str, stdout) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2)
    if cfg.out is None:
        stdout.write(text if text.endswith("\n") else text + "\n")
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / f"{stem}.{suffix}").write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def run(command: str, cfg: RunConfig, stdout=None) -> int:
    """Execute one subcommand; raises W1PlusError on failure."""
    stdout = stdout or sys.stdout
    cfg.validate(command)
    if command == "verify":
        tol = dataclasses.replace(Tolerances(), **cfg.tolerances)
        report = verify(_curve(cfg), tol, seed=cfg.seed)
        stdout.write(report.table() + "\n")
        if cfg.out is not None:
            _emit(cfg, "verify", report.to_document(), "json", stdout)
        if not report.passed:
            failed = [c.name for c in report.checks if c.gating and not c.passed]
            raise VerificationFailed(f"{len(failed)} check(s) failed", failed=failed)
        return 0
    handlers = {
        "w1": (cmd_w1, "json"),
        "orient": (cmd_orient, "json"),
        "weights": (cmd_weights, "json"),
        "couple": (cmd_couple, "json"),
        "geodesic": (cmd_geodesic, "json"),
        "sample": (cmd_sample, "csv"),
        "entropy": (cmd_entropy, "csv"),
    }
    fn, suffix = handlers[command]
    _emit(cfg, command, fn(cfg), suffix, stdout)
    return 0


def _times(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad time list {text!r}")


def _tolerance(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected NAME=VALUE")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value in {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="w1plus", description="Geodesics of distributions on graphs.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", type=Path, help="graph JSON {vertices, edges}")
    common.add_argument("--f0", type=Path, help="initial measure JSON {vertex: mass}")
    common.add_argument("--f1", type=Path, help="final measure JSON {vertex: mass}")
    common.add_argument("--weights", type=Path, help="custom edge weights JSON [[x, y, m], ...]")
    common.add_argument("--out", type=Path, help="output directory (default: standard output)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="marginal tolerance of the scaling")
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="scaling iteration cap")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("w1", "orient", "weights", "couple", "geodesic"):
        sub.add_parser(name, parents=[common])
    for name in ("sample", "entropy", "verify"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--curve", type=Path, help="curve JSON written by the geodesic subcommand")
    sub.choices["sample"].add_argument("--times", type=_times, default=[0.0, 0.5, 1.0],
                                       help="comma-separated times in [0, 1]")
    sub.choices["entropy"].add_argument("--grid", type=int, default=101, help="number of grid points")
    sub.choices["verify"].add_argument("--tolerance", type=_tolerance, action="append", default=[],
                                       metavar="NAME=VALUE", help="override one tolerance")
    sub.choices["verify"].add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        graph=args.graph, f0=args.f0, f1=args.f1, weights=args.weights, out=args.out,
        tol=args.tol, max_iter=args.max_iter,
        curve=getattr(args, "curve", None),
        grid=getattr(args, "grid", 101),
        times=getattr(args, "times", [0.0, 0.5, 1.0]),
        tolerances=dict(getattr(args, "tolerance", [])),
        seed=getattr(args, "seed", 0),
    )
    try:
        return run(args.command, cfg)
    except W1PlusError as exc:
        sys.stderr.write(json.dumps(exc.to_dict()) + "\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
