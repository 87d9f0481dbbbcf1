"""Command-line scenario runner.

    relcollapse <scenario> [--seed S] [--trials N] [--output PATH] [--forced a,b,c]
                           [--param key=value ...] [--summary PATH]
    relcollapse run FILE.toml

Exit codes: 0 all invariants hold, 1 some invariant failed, 2 bad
configuration.  A scenario file looks like::

    scenario = "t2"
    seed = 7
    trials = 1000
    output = "t2.jsonl"

    [params]
    input = "singlet"
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .protocol import ProtocolError
from .scenarios import SCENARIOS
from .trace import RunTrace, _jsonable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


class ScenarioFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: str
    params: dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = Field(None, ge=0)
    trials: int = Field(1, ge=1)
    output: Optional[str] = None
    summary: Optional[str] = None
    forced: Optional[tuple[int, int, int]] = None


def _format_validation(err: ValidationError, prefix: str = "") -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in (prefix, *e["loc"]) if p != "")
        lines.append(f"field '{loc or '<root>'}': {e['msg']}")
    return "; ".join(lines)


def load_scenario_file(path: str | Path) -> ScenarioFile:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc  # message carries line and column
    try:
        return ScenarioFile.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {_format_validation(exc)}") from exc


def validate(sf: ScenarioFile):
    """Check names, seed and parameters before any computation; returns the params model."""
    if sf.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {sf.scenario!r}; valid names: {', '.join(SCENARIOS)}")
    model, _, stochastic = SCENARIOS[sf.scenario]
    if stochastic and sf.seed is None and sf.forced is None:
        raise ConfigError(f"field 'seed': required for the stochastic scenario {sf.scenario!r}")
    if sf.forced is not None:
        if sf.scenario != "relativistic-t2":
            raise ConfigError("field 'forced': only the relativistic-t2 scenario takes forced outcomes")
        if any(v not in (-1, 0, 1) for v in sf.forced):
            raise ConfigError(f"field 'forced': outcomes must be -1, 0 or 1, got {sf.forced}")
    try:
        return model.model_validate(sf.params)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc, "params")) from exc


def run_scenario(sf: ScenarioFile) -> RunTrace:
    params = validate(sf)
    _, runner, _ = SCENARIOS[sf.scenario]
    return runner(params, sf.seed, sf.trials, sf.forced)


def emit_summary(trace: RunTrace) -> dict:
    """Summary record: the scenario's statistics plus the invariant verdicts.

    An empty trace (no records, no checks) gives an empty dict.
    """
    if not trace.records and not trace.invariants and not trace.summary:
        return {}
    return _jsonable({"scenario": trace.scenario, "seed": trace.seed, "version": trace.version,
                      "invariants": trace.invariants, "ok": trace.ok, **trace.summary})


def _write(text: str, dest: Optional[str]):
    if dest is None:
        return
    if dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text, encoding="utf-8")


def execute(sf: ScenarioFile, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        trace = run_scenario(sf)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        # the run itself broke an invariant (e.g. the literal factor ordering)
        print(f"invariant failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    _write(trace.to_jsonl(), sf.output)
    summary = emit_summary(trace)
    text = json.dumps(summary, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if sf.summary:
        _write(text, sf.summary)
    if sf.output != "-" and sf.summary != "-":
        stdout.write(text)
    for name, ok in trace.invariants.items():
        if not ok:
            print(f"invariant failed: {name}", file=sys.stderr)
    return EXIT_OK if trace.ok else EXIT_INVARIANT


def _parse_value(text: str):
    # TOML value syntax; bare words fall back to strings
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _parse_params(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--param expects key=value, got {item!r}")
        out[key.strip()] = _parse_value(value.strip())
    return out


def _parse_forced(text: Optional[str]):
    if text is None:
        return None
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--forced expects three integers like '0,0,0', got {text!r}") from exc
    if len(vals) != 3:
        raise ConfigError(f"--forced expects three outcomes (6, 4*, 6*), got {len(vals)}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relcollapse", description="Run collapse-model scenarios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SCENARIO")
    sub.required = True
    run = sub.add_parser("run", help="run a TOML scenario file")
    run.add_argument("file")
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--seed", type=int, help="RNG seed (required for stochastic scenarios)")
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--output", help="JSONL trace destination, '-' for stdout")
        p.add_argument("--summary", help="summary JSON destination, '-' for stdout")
        p.add_argument("--param", action="append", metavar="KEY=VALUE", help="scenario parameter")
        if name == "relativistic-t2":
            p.add_argument("--forced", help="outcomes of probes 6, 4*, 6*, e.g. '0,0,0'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            sf = load_scenario_file(args.file)
        else:
            raw = {"scenario": args.command, "params": _parse_params(args.param),
                   "seed": args.seed, "trials": args.trials, "output": args.output,
                   "summary": args.summary, "forced": _parse_forced(getattr(args, "forced", None))}
            try:
                sf = ScenarioFile.model_validate(raw)
            except ValidationError as exc:
                raise ConfigError(_format_validation(exc)) from exc
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return execute(sf)


if __name__ == "__main__":
    sys.exit(main())
