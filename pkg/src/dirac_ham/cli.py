"""``dirac-ham``: run the constraint analysis on a model and report."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from . import audit as audit_mod
from .engine import pipeline as P
from .engine.report import analyze
from .frontend.model import load_model, parse_model
from .frontend.parser import DSLSyntaxError, ValidationError
from .oracle import LatticeConfig, run_oracle
from .oracle.lattice import UnstableStep
from .quantum import vacuum_report
from .symcore import SymcoreError

STAGES = ("analyze", "brackets", "dof", "extended", "vacuum", "oracle", "symmetry", "audit")
EXIT_OK, EXIT_ERROR, EXIT_MISMATCH = 0, 1, 2
SEED_ENV = "DIRAC_HAM_SEED"

# sections shown in text mode per verb (JSON always carries every key)
TEXT_SECTIONS = {
    "analyze": None,
    "brackets": ("model", "constraints", "W", "diracBrackets", "notes"),
    "dof": ("model", "constraints", "reducibility", "reducibilitySummary", "dof", "notes"),
    "extended": ("model", "multipliers", "extendedAction", "extendedH", "firstClassAudit", "eom"),
    "vacuum": ("model", "extendedH", "vacuum"),
    "oracle": ("model", "W", "dof", "oracle"),
    "symmetry": ("model", "symmetry"),
    "audit": ("model", "audit"),
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    model_source: str
    stages: tuple
    use_auxiliary: bool = None
    reducibility_order: int = 1
    lattice: LatticeConfig = field(default_factory=LatticeConfig)
    output_format: str = "text"
    seed: int = 0
    pairs: list = None
    out: str = None
    verb: str = "analyze"

    def __post_init__(self):
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise UsageError(f"unknown stage(s): {', '.join(unknown)}")
        if self.output_format not in ("text", "json"):
            raise UsageError("format must be text or json")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dirac-ham", description="Dirac constraint analysis of field-theory Lagrangians.")
    p.add_argument("verb", choices=STAGES)
    p.add_argument("--model", required=True, help="preset name, path to a .lag file, or - for stdin")
    p.add_argument("--format", choices=("text", "json"), default="text")
    aux = p.add_mutually_exclusive_group()
    aux.add_argument("--use-auxiliary", dest="use_auxiliary", action="store_true", default=None)
    aux.add_argument("--no-auxiliary", dest="use_auxiliary", action="store_false")
    p.add_argument("--reducibility-order", type=int, default=1)
    p.add_argument("--grid", type=int, default=LatticeConfig.grid)
    p.add_argument("--steps", type=int, default=LatticeConfig.steps)
    p.add_argument("--dt", type=float, default=LatticeConfig.dt)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report here; oracle artifacts go next to it")
    p.add_argument("--pair", nargs=2, action="append", metavar=("LEFT", "RIGHT"),
                   help="bracket pair such as 'E[i]' 'B[j]@y' (repeatable)")
    return p


def build_config(argv) -> RunConfig:
    ns = _parser().parse_args(argv)
    seed = ns.seed
    if os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer")
    if ns.reducibility_order < 0:
        raise UsageError("--reducibility-order must be non-negative")
    try:
        lattice = LatticeConfig(grid=ns.grid, steps=ns.steps, dt=ns.dt, seed=seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    stages = ("analyze", ns.verb) if ns.verb != "analyze" else ("analyze",)
    if ns.verb == "audit":
        stages = ("analyze", "vacuum", "audit")
    return RunConfig(ns.model, stages, ns.use_auxiliary, ns.reducibility_order, lattice, ns.format, seed,
                     [tuple(p) for p in ns.pair] if ns.pair else None, ns.out, ns.verb)


def _load(source: str):
    if source == "-":
        return parse_model(sys.stdin.read())
    return load_model(source)


def run(config: RunConfig) -> tuple:
    """Execute the stages; returns (exit status, report dict)."""
    model = _load(config.model_source)
    report = analyze(model, config.use_auxiliary, config.reducibility_order, config.pairs)
    vacuum = None
    if "vacuum" in config.stages:
        vacuum = vacuum_report(report.extendedH, model)
        report.vacuum = vacuum
    if "oracle" in config.stages:
        out_dir = os.path.dirname(os.path.abspath(config.out)) if config.out else None
        report.oracle = run_oracle(report, config.lattice, out_dir)
    status = EXIT_OK
    if "audit" in config.stages:
        rows = audit_mod.audit(report, audit_mod.expectations_for(model.name), vacuum)
        report.audit = [r.to_dict() for r in rows]
        if audit_mod.has_mismatch(rows):
            status = EXIT_MISMATCH
    data = report.to_dict()
    data["seed"] = config.seed
    return status, data


def to_json(data: dict) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def _text_lines(value, indent: int = 0) -> list:
    pad = "  " * indent
    if isinstance(value, dict):
        lines = []
        for k, v in value.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.extend(_text_lines(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
        return lines
    if isinstance(value, list):
        lines = []
        for item in value:
            if isinstance(item, dict) and item:
                sub = _text_lines(item, indent + 1)
                lines.append(pad + "- " + sub[0].lstrip())
                lines.extend(sub[1:])
            elif isinstance(item, list):
                lines.append(f"{pad}- [{', '.join(_scalar(x) for x in item)}]")
            else:
                lines.append(f"{pad}- {_scalar(item)}")
        return lines
    return [pad + _scalar(value)]


def _scalar(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (dict, list)):
        return "{}" if isinstance(v, dict) else "[]"
    return str(v)


def to_text(data: dict, verb: str = "analyze") -> str:
    keys = TEXT_SECTIONS.get(verb) or tuple(data)
    out = []
    for k in keys:
        if k not in data:
            continue
        v = data[k]
        if isinstance(v, (dict, list)) and not v:
            continue
        out.append(f"== {k} ==")
        out.extend(_text_lines(v) if isinstance(v, (dict, list)) else [_scalar(v)])
    return "\n".join(out) + "\n"


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = build_config(argv)
        status, data = run(config)
    except UsageError as exc:
        print(f"dirac-ham: usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (DSLSyntaxError, ValidationError, P.EngineError, SymcoreError, UnstableStep, OSError, KeyError,
            ValueError) as exc:
        print(f"dirac-ham: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = to_json(data) if config.output_format == "json" else to_text(data, config.verb)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
