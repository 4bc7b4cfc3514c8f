"""Structured run reports: every numeric check carries its measured value,
its threshold and a pass flag; timings live in a separate section excluded
from the byte-determinism guarantee."""

from __future__ import annotations

import json
import sys
import time

from . import __version__

__all__ = ["RunReport"]


class RunReport:
    def __init__(self, command: str, config_digest: str = None):
        self.data = {
            "tool_version": __version__,
            "command": command,
            "config_digest": config_digest,
            "sections": {},
            "checks": [],
        }
        self.timings = {}
        self._t0 = time.perf_counter()

    def section(self, name: str, payload: dict) -> None:
        self.data["sections"][name] = payload

    def check(self, name: str, value: float, threshold: float, op: str = "<") -> bool:
        """Record a pass/fail check; op is '<' or '>' against the threshold."""
        value = float(value)
        ok = value < threshold if op == "<" else value > threshold
        self.data["checks"].append({
            "name": name, "value": value, "threshold": threshold,
            "op": op, "pass": bool(ok),
        })
        return bool(ok)

    def flag(self, name: str, ok: bool, detail: str = "") -> bool:
        self.data["checks"].append({
            "name": name, "pass": bool(ok), "detail": detail,
            "value": None, "threshold": None, "op": None,
        })
        return bool(ok)

    def time_mark(self, name: str) -> None:
        self.timings[name] = time.perf_counter() - self._t0

    @property
    def all_passed(self) -> bool:
        return all(c["pass"] for c in self.data["checks"])

    def to_json(self, include_timings: bool = True) -> str:
        payload = dict(self.data)
        if include_timings:
            payload = dict(payload, timings=self.timings)
        return json.dumps(payload, sort_keys=True, indent=2, default=_encode)

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def print_summary(self, stream=None) -> None:
        stream = stream or sys.stdout
        d = self.data
        print(f"neckglue {d['tool_version']} :: {d['command']}", file=stream)
        if d["config_digest"]:
            print(f"config digest {d['config_digest']}", file=stream)
        for c in d["checks"]:
            mark = "ok " if c["pass"] else "FAIL"
            if c["value"] is not None:
                print(
                    f"  [{mark}] {c['name']}: {c['value']:.6g} {c['op']} {c['threshold']:.6g}",
                    file=stream,
                )
            else:
                detail = f" ({c['detail']})" if c.get("detail") else ""
                print(f"  [{mark}] {c['name']}{detail}", file=stream)
        verdict = "all checks passed" if self.all_passed else "SOME CHECKS FAILED"
        print(f"  => {verdict}", file=stream)


def _encode(obj):
    import numpy as np

    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)!r}")
