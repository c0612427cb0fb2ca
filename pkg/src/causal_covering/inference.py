"""Exact sum-product over binary factors.

A factor is a pair ``(scope, table)`` where ``table`` is a flat float array
of length ``2**len(scope)`` and bit ``j`` of the index is the value of
``scope[j]``.  Elimination plans depend only on the factor scopes, so they are
built once (greedy min-degree order) and cached; the numeric work happens in
``kernels.run_plan``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import kernels
from .errors import TreewidthCapExceeded

DEFAULT_WIDTH_CAP = 24


class EliminationPlan:
    """Flattened elimination schedule consumed by ``kernels.run_plan``.

    Slots ``0..n_inputs-1`` are the input factors; step ``s`` writes slot
    ``n_inputs + s``.  ``final_slots`` are the scalar slots whose product is
    the result.
    """

    def __init__(self, n_inputs, nunion, elim, in_ptr, in_slot, pos_ptr, pos, final_slots, order, width):
        self.n_inputs = n_inputs
        self.nunion = np.asarray(nunion, dtype=np.int64)
        self.elim = np.asarray(elim, dtype=np.int64)
        self.in_ptr = np.asarray(in_ptr, dtype=np.int64)
        self.in_slot = np.asarray(in_slot, dtype=np.int64)
        self.pos_ptr = np.asarray(pos_ptr, dtype=np.int64)
        self.pos = np.asarray(pos, dtype=np.int64)
        self.final_slots = tuple(final_slots)
        self.order = tuple(order)
        self.width = width
        self.index_cache = {}


@lru_cache(maxsize=16384)
def build_plan(scopes: tuple, width_cap: int = DEFAULT_WIDTH_CAP) -> EliminationPlan:
    scope_of = [tuple(s) for s in scopes]
    var_slots: dict[int, set] = {}
    nb: dict[int, set] = {}
    final = []
    for k, sc in enumerate(scope_of):
        if not sc:
            final.append(k)
        for v in sc:
            var_slots.setdefault(v, set()).add(k)
            nb.setdefault(v, set()).update(u for u in sc if u != v)

    nunion, elim, in_ptr, in_slot, pos_ptr, pos, order = [], [], [0], [], [0], [], []
    width = 0
    while var_slots:
        v = min(var_slots, key=lambda u: (len(nb[u]), u))
        inputs = sorted(var_slots.pop(v))
        union = sorted(set().union(*(scope_of[k] for k in inputs)))
        if len(union) > width_cap:
            raise TreewidthCapExceeded(
                f"eliminating {v} needs a {len(union)}-variable factor (cap {width_cap})")
        width = max(width, len(union))
        where = {u: j for j, u in enumerate(union)}
        for k in inputs:
            in_slot.append(k)
            pos.extend(where[u] for u in scope_of[k])
            pos_ptr.append(len(pos))
        in_ptr.append(len(in_slot))
        nunion.append(len(union))
        elim.append(where[v])
        order.append(v)

        new_scope = tuple(u for u in union if u != v)
        new_slot = len(scope_of)
        scope_of.append(new_scope)
        for u in new_scope:
            slots = var_slots[u]
            slots.difference_update(inputs)
            slots.add(new_slot)
            nb[u].update(w for w in new_scope if w != u)
            nb[u].discard(v)
        del nb[v]
        if not new_scope:
            final.append(new_slot)

    return EliminationPlan(len(scopes), nunion, elim, in_ptr, in_slot, pos_ptr, pos,
                           sorted(final), order, width)


def reduce_factor(scope, table, fixed: dict):
    """Condition a factor on ``fixed`` values, dropping those variables."""
    drop = [j for j, v in enumerate(scope) if v in fixed]
    if not drop:
        return tuple(scope), table
    k = len(scope)
    t = np.asarray(table).reshape((2,) * k)
    index = []
    # C-order axis 0 is the most significant bit, i.e. scope[k - 1]
    for axis in range(k):
        v = scope[k - 1 - axis]
        index.append(int(fixed[v]) if v in fixed else slice(None))
    reduced = np.ascontiguousarray(t[tuple(index)], dtype=np.float64).ravel()
    return tuple(v for v in scope if v not in fixed), reduced


def eliminate(factors, width_cap: int = DEFAULT_WIDTH_CAP) -> float:
    """Sum over every variable of the product of ``factors``."""
    if not factors:
        return 1.0
    scopes = tuple(tuple(sc) for sc, _ in factors)
    plan = build_plan(scopes, width_cap)
    return kernels.run_plan([np.asarray(t, dtype=np.float64) for _, t in factors], plan)


def enumerate_sum(factors, chunk: int = 1 << 16) -> float:
    """Brute-force counterpart of ``eliminate``: visits every joint assignment."""
    variables = sorted(set().union(*(sc for sc, _ in factors))) if factors else []
    where = {v: j for j, v in enumerate(variables)}
    total = 0.0
    size = 1 << len(variables)
    for start in range(0, size, chunk):
        a = np.arange(start, min(start + chunk, size), dtype=np.int64)
        prod = np.ones(a.size)
        for sc, t in factors:
            idx = np.zeros(a.size, dtype=np.int64)
            for j, v in enumerate(sc):
                idx |= ((a >> where[v]) & 1) << j
            prod *= np.asarray(t)[idx]
        total += float(prod.sum())
    return total
