"""Shared helpers: canonical JSON, complex serialization, digests, worker caps."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np


def pair(z) -> list[float]:
    """Complex scalar -> [re, im] (the wire format used everywhere)."""
    z = complex(z)
    return [float(z.real), float(z.imag)]


def pairs(zs) -> list[list[float]]:
    return [pair(z) for z in zs]


def unpair(p) -> complex:
    return complex(float(p[0]), float(p[1]))


def unpairs(ps) -> np.ndarray:
    return np.array([unpair(p) for p in ps], dtype=np.complex128)


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def digest(obj) -> str:
    """sha256 hex digest of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def max_workers(limit: int | None = None) -> int:
    """Worker cap: QUASISPEC_THREADS env var bounds all concurrency."""
    env = os.environ.get("QUASISPEC_THREADS", "")
    try:
        cap = int(env) if env else 1
    except ValueError:
        cap = 1
    cap = max(1, cap)
    if limit is not None:
        cap = min(cap, max(1, limit))
    return cap


def sort_canonical(values) -> np.ndarray:
    """Sort complex values by |z|, ties broken by principal argument in (-pi, pi]."""
    arr = np.asarray(values, dtype=np.complex128)
    order = sorted(range(arr.size), key=lambda i: (abs(arr[i]), np.angle(arr[i])))
    return arr[order]
