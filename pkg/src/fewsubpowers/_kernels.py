"""Compiled inner loops for path consistency on bitset rows."""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_BITS = 64


@njit(cache=True)
def _pc_fixpoint(bits):  # pragma: no cover - compiled
    """In place: drop ``b`` from ``bits[x, y, a]`` when some ``z`` has ``bits[x, z, a] & bits[y, z, b] == 0``.

    ``bits[x, x, a]`` is ``1 << a`` for live ``a`` and 0 otherwise, so the
    diagonal carries the domains.  Returns False when a domain empties.
    A pair is revisited only if a row of one of its variables changed after
    it was last checked.
    """
    v = bits.shape[0]
    n = bits.shape[2]
    clock = 1
    touched = np.ones(v, dtype=np.int64)  # last change to any row bits[x, *]
    checked = np.zeros((v, v), dtype=np.int64)
    one = np.uint64(1)
    changed = True
    while changed:
        changed = False
        for x in range(v):
            for y in range(x, v):
                if touched[x] <= checked[x, y] and touched[y] <= checked[x, y]:
                    continue
                checked[x, y] = clock
                for a in range(n):
                    row = bits[x, y, a]
                    if row == 0:
                        continue
                    keep = row
                    for b in range(n):
                        if not (row >> b) & one:
                            continue
                        for z in range(v):
                            if bits[x, z, a] & bits[y, z, b] == 0:
                                keep &= ~(one << np.uint64(b))
                                break
                    if keep != row:
                        changed = True
                        clock += 1
                        bits[x, y, a] = keep
                        for b in range(n):
                            if (row >> b) & one and not (keep >> b) & one:
                                bits[y, x, b] &= ~(one << np.uint64(a))
                        touched[x] = clock
                        touched[y] = clock
                        if x == y:
                            # the diagonal is the domain: a dead value loses all its rows
                            for w in range(v):
                                bits[x, w, a] = 0
                                for c in range(n):
                                    bits[w, x, c] &= ~(one << np.uint64(a))
                                touched[w] = clock
                            dead = True
                            for c in range(n):
                                if bits[x, x, c] != 0:
                                    dead = False
                                    break
                            if dead:
                                return False
        for x in range(v):
            for a in range(n):
                if bits[x, x, a] == 0:
                    continue
                for y in range(v):
                    if bits[x, y, a] == 0:
                        clock += 1
                        bits[x, x, a] = 0
                        for w in range(v):
                            bits[x, w, a] = 0
                            for c in range(n):
                                bits[w, x, c] &= ~(one << np.uint64(a))
                            touched[w] = clock
                        changed = True
                        break
            empty = True
            for a in range(n):
                if bits[x, x, a] != 0:
                    empty = False
                    break
            if empty:
                return False
    return True


@njit(cache=True)
def _restricted(bits, masks):  # pragma: no cover - compiled
    v = bits.shape[0]
    n = bits.shape[2]
    out = np.zeros_like(bits)
    one = np.uint64(1)
    for x in range(v):
        for a in range(n):
            if not (masks[x] >> np.uint64(a)) & one:
                continue
            for y in range(v):
                out[x, y, a] = bits[x, y, a] & masks[y]
    return out


def restricted_domains(bits: np.ndarray, masks: np.ndarray) -> np.ndarray | None:
    """Domains of the path-consistent closure after restricting to ``masks``, or ``None``."""
    sub = _restricted(bits, masks)
    if not _pc_fixpoint(sub):
        return None
    diag = sub[np.arange(bits.shape[0]), np.arange(bits.shape[0])]  # (V, N)
    return diag != 0


def to_bits(rel: np.ndarray) -> np.ndarray:
    weights = np.uint64(1) << np.arange(rel.shape[-1], dtype=np.uint64)
    return (rel.astype(np.uint64) * weights).sum(axis=-1, dtype=np.uint64)


def mask_bits(mask: np.ndarray) -> np.ndarray:
    return (mask.astype(np.uint64) << np.arange(mask.shape[-1], dtype=np.uint64)).sum(axis=-1, dtype=np.uint64)


def from_bits(bits: np.ndarray, n: int) -> np.ndarray:
    return ((bits[..., None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(bool)


def pc_fixpoint(rel: np.ndarray) -> np.ndarray | None:
    """Greatest path-consistent sub-relation of the dense ``(V, V, N, N)`` array, or ``None``."""
    bits = to_bits(rel)
    if not _pc_fixpoint(bits):
        return None
    return from_bits(bits, rel.shape[-1])
