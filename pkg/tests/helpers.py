"""Shared test helpers."""

from pathlib import Path

import numpy as np

from ballpack.tet_geometry import q_value

DATA = Path(__file__).resolve().parent.parent / "data"


def log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=size))


def random_real_packing(rng, t, spread=2.0):
    """Log-uniform radii in [1/spread, spread], redrawn until every tetrahedron is real."""
    while True:
        r = log_uniform(rng, 1.0 / spread, spread, t.num_vertices)
        if all(q_value(r[tet]) > 0 for tet in t.tetrahedra):
            return r


# criterion number -> (passed, one-line summary); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def verdict(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE[number] = (passed, line)
    print(line)
    assert passed, line
