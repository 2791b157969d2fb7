"""File formats: radii, curvature/optimizer records, run manifests."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io as _io
import math
from pathlib import Path

import numpy as np

from .curvature import CurvatureReport
from .optimize import MinimizeResult


class RadiiParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any float64."""
    return format(float(x), ".17g")


def parse_vector(text: str, positive: bool = True, what: str = "radius") -> np.ndarray:
    """One real per line; blank lines and ``#`` comments are skipped."""
    vals = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        try:
            x = float(s)
        except ValueError:
            raise RadiiParseError(f"cannot parse {what} {s!r}", lineno) from None
        if not math.isfinite(x):
            raise RadiiParseError(f"{what} must be finite", lineno)
        if positive and x <= 0:
            raise RadiiParseError(f"{what} must be positive, got {s}", lineno)
        vals.append(x)
    return np.array(vals, dtype=np.float64)


def read_radii(path) -> np.ndarray:
    return parse_vector(Path(path).read_text())


def format_vector(v) -> str:
    return "".join(fmt(x) + "\n" for x in v)


def write_radii(path, r) -> None:
    Path(path).write_text(format_vector(r))


# --- line records ----------------------------------------------------------------

def report_lines(rep: CurvatureReport) -> list[str]:
    lines = [f"vertices {len(rep.r)}", f"mode {'extended' if rep.extended else 'real'}"]
    lines += [f"r {i} {fmt(x)}" for i, x in enumerate(rep.r)]
    lines += [f"K {i} {fmt(x)}" for i, x in enumerate(rep.k)]
    lines += [f"S {fmt(rep.s)}", f"lambda {fmt(rep.lam)}", f"l1 {fmt(rep.l1)}",
              f"minQ {fmt(rep.min_q)}", f"is_real {str(rep.is_real).lower()}"]
    tets = " ".join(f"{n}:{a}" for n, a in rep.virtual_tets)
    lines.append(f"virtual_tets {tets}".rstrip())
    return lines


def format_report(rep: CurvatureReport) -> str:
    return "\n".join(report_lines(rep)) + "\n"


def format_result(res: MinimizeResult) -> str:
    lines = report_lines(res.report)
    lines += [f"iterations {res.iterations}", f"converged {str(res.converged).lower()}",
              f"projected_grad_norm {fmt(res.projected_grad_norm)}",
              f"curvature_error {fmt(res.curvature_error)}", f"objective {fmt(res.objective)}",
              f"message {res.message}"]
    return "\n".join(lines) + "\n"


def parse_record(text: str) -> dict:
    """Inverse of :func:`format_report` / :func:`format_result`.

    Per-vertex lines are collected into arrays under ``r`` and ``K``; other
    keys map to floats, ints, booleans or strings.
    """
    out: dict = {}
    vec: dict[str, dict[int, float]] = {"r": {}, "K": {}}
    for raw in text.splitlines():
        if not raw.strip():
            continue
        key, _, rest = raw.partition(" ")
        if key in vec:
            i, val = rest.split()
            vec[key][int(i)] = float(val)
        elif key == "virtual_tets":
            out[key] = [tuple(int(x) for x in item.split(":")) for item in rest.split()]
        elif key in ("vertices", "iterations"):
            out[key] = int(rest)
        elif rest in ("true", "false"):
            out[key] = rest == "true"
        elif key in ("mode", "message"):
            out[key] = rest
        else:
            out[key] = float(rest)
    for key, d in vec.items():
        out[key] = np.array([d[i] for i in range(len(d))])
    return out


def report_csv(rep: CurvatureReport) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vertex", "r", "K", "K_r"])
    for i, (r, k) in enumerate(zip(rep.r, rep.k)):
        w.writerow([i, fmt(r), fmt(k), fmt(k * r)])
    w.writerow([])
    w.writerow(["quantity", "value"])
    for key, val in (("S", rep.s), ("lambda", rep.lam), ("l1", rep.l1), ("minQ", rep.min_q)):
        w.writerow([key, fmt(val)])
    w.writerow(["n_virtual", len(rep.virtual_tets)])
    return buf.getvalue()


# --- manifests --------------------------------------------------------------------

def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def format_manifest(entries: dict) -> str:
    """``key = value`` lines in insertion order."""
    lines = []
    for key, val in entries.items():
        if isinstance(val, float):
            val = fmt(val)
        elif isinstance(val, (list, tuple, np.ndarray)):
            val = " ".join(fmt(x) if isinstance(x, float) else str(x) for x in val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> dict[str, str]:
    out = {}
    for raw in text.splitlines():
        if raw.strip():
            key, sep, val = raw.partition(" = ")
            if not sep:
                raise ValueError(f"malformed manifest line: {raw!r}")
            out[key] = val
    return out
