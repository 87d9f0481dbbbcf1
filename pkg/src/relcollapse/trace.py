"""Deterministic run traces and state digests.

A trace is an ordered list of stage records plus run metadata.  It is
written as JSON lines: one header line, one line per record, one footer
with the invariant verdicts.  Nothing time- or host-dependent is stored,
so replaying a scenario with the same seed reproduces the file byte for
byte.
"""
from __future__ import annotations

import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from . import __version__
from .linalg import StateVector, canonical_phase

DIGEST_DECIMALS = 12


def state_digest(state) -> str:
    """sha256 of the amplitudes after fixing the global phase and rounding.

    The first amplitude with modulus above 1e-12 is rotated to the positive
    real axis, then real and imaginary parts are rounded to 12 decimals and
    negative zeros are cleared, so states equal up to a global phase (and
    roundoff well below 1e-12) share a digest.
    """
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    amps = canonical_phase(amps.reshape(-1))
    parts = np.round(np.stack([amps.real, amps.imag], axis=-1), DIGEST_DECIMALS)
    parts = parts + 0.0  # -0.0 -> 0.0
    dims = state.factor_dims if isinstance(state, StateVector) else (amps.size,)
    h = hashlib.sha256()
    h.update(repr(tuple(dims)).encode())
    h.update(np.ascontiguousarray(parts, dtype="<f8").tobytes())
    return h.hexdigest()


def amplitudes_to_json(state) -> list[list[float]]:
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    return [[float(a.real), float(a.imag)] for a in amps.reshape(-1)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


@dataclass
class TraceRecord:
    stage: str
    description: str = ""
    state_digest: str | None = None
    amplitudes: list | None = None
    outcomes: Any = None
    probabilities: Any = None
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None and v != {}}
        return _jsonable(d)


@dataclass
class RunTrace:
    scenario: str
    seed: int | None = None
    version: str = __version__
    records: list[TraceRecord] = field(default_factory=list)
    invariants: dict[str, bool] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def add(self, stage: str, description: str = "", state: StateVector | None = None,
            dump_amplitudes: bool = False, **kw) -> TraceRecord:
        rec = TraceRecord(stage, description, **kw)
        if state is not None:
            rec.state_digest = state_digest(state)
            if dump_amplitudes:
                rec.amplitudes = amplitudes_to_json(state)
        self.records.append(rec)
        return rec

    def check(self, name: str, ok: bool) -> bool:
        """Record an invariant verdict; a name checked twice keeps the conjunction."""
        self.invariants[name] = bool(ok) and self.invariants.get(name, True)
        return bool(ok)

    @property
    def ok(self) -> bool:
        return all(self.invariants.values())

    def header(self) -> dict:
        return {"kind": "header", "scenario": self.scenario, "seed": self.seed, "version": self.version}

    def lines(self):
        yield self.header()
        for rec in self.records:
            yield {"kind": "record", **rec.to_dict()}
        yield {"kind": "footer", "invariants": self.invariants, "ok": self.ok,
               "summary": _jsonable(self.summary)}

    def write_jsonl(self, dest: str | Path | TextIO) -> None:
        if isinstance(dest, (str, Path)):
            with open(dest, "w", encoding="utf-8") as fh:
                self.write_jsonl(fh)
            return
        for line in self.lines():
            dest.write(json.dumps(line, sort_keys=True, allow_nan=False) + "\n")

    def to_jsonl(self) -> str:
        buf = io.StringIO()
        self.write_jsonl(buf)
        return buf.getvalue()

    @classmethod
    def read_jsonl(cls, src: str | Path) -> "RunTrace":
        with open(src, encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        head, foot = rows[0], rows[-1]
        trace = cls(head["scenario"], head.get("seed"), head.get("version", __version__))
        for row in rows[1:-1]:
            row.pop("kind")
            trace.records.append(TraceRecord(**row))
        trace.invariants = dict(foot.get("invariants", {}))
        trace.summary = dict(foot.get("summary", {}))
        return trace
