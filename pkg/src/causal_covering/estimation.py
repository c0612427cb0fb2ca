"""Sample bookkeeping, plug-in tables and plug-in interventional means.

Both the fully observed and the semi-Markovian pipelines share one
representation: a *target* is a sorted vertex tuple ``S`` (a singleton in the
observed case) with parent set ``Pa(S)``, and its table is
``q[pa_mask, z_mask]`` = estimated P(z_S | do(Pa(S) = pa)).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import inference
from .cbn import (
    UNSET,
    CausalGraph,
    CausalModel,
    c_components,
    format_intervention,
    free_vertices,
    interventional_joint,
    parents_of_set,
    pseudo_parents,
    true_component_table,
)
from .errors import InsufficientCoverage, TreewidthCapExceeded

log = logging.getLogger(__name__)

OBSERVED = "observed"
SMBN = "smbn"
ENUMERATION_LIMIT = 22


def required_subsets(graph: CausalGraph, arms) -> list[tuple]:
    """Every c-component arising under some arm, in first-seen order."""
    seen = {}
    for a in arms:
        for comp in c_components(graph, a):
            seen.setdefault(comp, None)
    return list(seen)


class SampleStore:
    """Per-(target, parent assignment) outcome counts gathered while exploring.

    Samples are credited to a target only when the target is left free and its
    parents are all intervened (``pooled=False``).  ``pooled=True`` credits
    the realized parent values instead, which is what the observational
    baseline does.
    """

    def __init__(self, graph: CausalGraph, mode: str = OBSERVED, targets=None):
        if mode not in (OBSERVED, SMBN):
            raise ValueError(f"unknown mode {mode!r}")
        if targets is None:
            if mode == SMBN:
                raise ValueError("SMBN stores need explicit targets (see required_subsets)")
            targets = [(i,) for i in range(graph.n_observed)]
        self.graph = graph
        self.mode = mode
        self.targets = [tuple(sorted(s)) for s in targets]
        self.parents = {s: parents_of_set(graph, s) for s in self.targets}
        self.counts = {s: np.zeros((1 << len(self.parents[s]), 1 << len(s)), dtype=np.int64)
                       for s in self.targets}
        self.rounds: dict[str, int] = {}

    def n_total(self, target, pa_mask: int) -> int:
        return int(self.counts[_key(target)][pa_mask].sum())

    def n_one(self, i: int, pa_mask: int) -> int:
        return int(self.counts[(i,)][pa_mask, 1])

    def add_rounds(self, interventions, counts) -> None:
        for row, c in zip(np.atleast_2d(interventions), counts):
            key = format_intervention(row)
            self.rounds[key] = self.rounds.get(key, 0) + int(c)

    def record_batch(self, interventions, samples, pooled: bool = False) -> None:
        # vertex-major copies make the per-target column reads contiguous
        iv = np.ascontiguousarray(np.atleast_2d(np.asarray(interventions, dtype=np.int8)).T)
        z = np.ascontiguousarray(np.atleast_2d(np.asarray(samples)).T).astype(np.int64)
        free = iv == UNSET
        source = z if pooled else iv.astype(np.int64)
        for s in self.targets:
            pa = self.parents[s]
            ok = free[s[0]].copy()
            for v in s[1:]:
                ok &= free[v]
            if not pooled:
                for p in pa:
                    ok &= ~free[p]
            rows = np.flatnonzero(ok)
            if rows.size == 0:
                continue
            code = np.zeros(rows.size, dtype=np.int64)
            for b, p in enumerate(pa):
                code |= source[p, rows] << b
            width = len(pa)
            for b, v in enumerate(s):
                code |= z[v, rows] << (width + b)
            # code = pa_mask + z_mask * 2^|Pa|, i.e. the transposed table layout
            tbl = self.counts[s]
            flat = np.bincount(code, minlength=tbl.size)
            tbl += flat.reshape(1 << len(s), 1 << len(pa)).T


def _key(target):
    return (target,) if isinstance(target, (int, np.integer)) else tuple(target)


def record_sample(store: SampleStore, a, z, pooled: bool = False) -> None:
    """Credit one sample ``z`` drawn under intervention ``a``."""
    a = np.asarray(a, dtype=np.int8)
    store.record_batch(a[None, :], np.asarray(z)[None, :], pooled)
    store.add_rounds(a[None, :], [1])


@dataclass
class PluginTables:
    mode: str
    parents: dict
    tables: dict
    warnings: set = field(default_factory=set)

    def p_hat(self, i: int, pa_mask: int) -> float:
        return float(self.tables[(i,)][pa_mask, 1])

    def q_hat(self, subset, pa_mask: int) -> np.ndarray:
        return self.tables[tuple(subset)][pa_mask]


def finalize(store: SampleStore) -> PluginTables:
    """Ratio estimates; keys without samples get the uniform default and a warning."""
    tables = {}
    warnings = set()
    for s, cnt in store.counts.items():
        total = cnt.sum(axis=1)
        q = np.empty(cnt.shape, dtype=np.float64)
        seen = total > 0
        q[seen] = cnt[seen] / total[seen, None]
        q[~seen] = 1.0 / cnt.shape[1]
        for pa_mask in np.flatnonzero(~seen):
            warnings.add((s, int(pa_mask)))
        tables[s] = q
    if warnings:
        log.debug("%d plug-in keys had no samples", len(warnings))
    return PluginTables(store.mode, dict(store.parents), tables, warnings)


def tables_from_model(model: CausalModel, mode: str = OBSERVED, targets=None) -> PluginTables:
    """Plug-in tables equal to the ground truth (zero estimation error)."""
    if targets is None:
        targets = [(i,) for i in range(model.n)]
    parents, tables = {}, {}
    for s in targets:
        s = tuple(sorted(s))
        parents[s], tables[s] = true_component_table(model, s)
    return PluginTables(mode, parents, tables)


class _FactorBuilder:
    """Builds reduced plug-in factors for arms, caching shared ones."""

    def __init__(self, tables: PluginTables, graph: CausalGraph):
        self.tables = tables
        self.graph = graph
        self.cache = {}

    def factor(self, s, a):
        pa = self.tables.parents.get(s)
        if pa is None:
            raise InsufficientCoverage(f"no plug-in table for target {s}")
        key = (s, tuple(int(a[p]) for p in pa))
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        q = self.tables.tables[s]
        scope = tuple(pa) + tuple(s)
        flat = np.ascontiguousarray(q.T).ravel()
        fixed = {p: int(a[p]) for p in pa if a[p] != UNSET}
        r = self.graph.reward_vertex
        if r in s:
            fixed[r] = 1
        out = inference.reduce_factor(scope, flat, fixed)
        self.cache[key] = out
        return out

    def factors_for(self, a):
        g = self.graph
        if self.tables.mode == OBSERVED:
            comps = [(i,) for i in free_vertices(a)]
        else:
            comps = c_components(g, a)
        comp_of = {v: c for c in comps for v in c}
        # only components feeding the reward matter; the rest sum to one
        relevant = {comp_of[g.reward_vertex]}
        stack = [comp_of[g.reward_vertex]]
        while stack:
            c = stack.pop()
            pa = self.tables.parents.get(c)
            if pa is None:
                raise InsufficientCoverage(f"no plug-in table for target {c}")
            for p in pa:
                if a[p] == UNSET and comp_of[p] not in relevant:
                    relevant.add(comp_of[p])
                    stack.append(comp_of[p])
        return [self.factor(c, a) for c in comps if c in relevant]


def plugin_means(tables: PluginTables, graph: CausalGraph, arms,
                 width_cap: int = inference.DEFAULT_WIDTH_CAP) -> np.ndarray:
    """Plug-in estimate of P[V_N = 1 | do(A)] for every arm."""
    builder = _FactorBuilder(tables, graph)
    return np.array([_plugin_mean(builder, np.asarray(a, dtype=np.int8), width_cap) for a in arms])


def plugin_mean(tables: PluginTables, graph: CausalGraph, a,
                width_cap: int = inference.DEFAULT_WIDTH_CAP) -> float:
    return float(plugin_means(tables, graph, [a], width_cap)[0])


def _plugin_mean(builder: _FactorBuilder, a, width_cap) -> float:
    r = builder.graph.reward_vertex
    if a[r] != UNSET:
        return float(a[r])
    factors = builder.factors_for(a)
    try:
        return inference.eliminate(factors, width_cap)
    except TreewidthCapExceeded:
        if len(free_vertices(a)) <= ENUMERATION_LIMIT:
            return inference.enumerate_sum(factors)
        raise


def delta_p(tables: PluginTables, model: CausalModel) -> float:
    """Largest estimation error over all keys.

    Absolute error of P(V_i = 1 | pa) in observed mode, total variation
    distance of the component distribution in SMBN mode.
    """
    worst = 0.0
    for s, q in tables.tables.items():
        pa, truth = true_component_table(model, s)
        if tuple(pa) != tuple(tables.parents[s]):
            raise ValueError(f"parent sets disagree for {s}")
        if tables.mode == OBSERVED and len(s) == 1:
            err = float(np.max(np.abs(truth[:, 1] - q[:, 1]))) if q.size else 0.0
        else:
            err = float(np.max(0.5 * np.abs(truth - q).sum(axis=1)))
        worst = max(worst, err)
    return worst


def c_component_probability(model: CausalModel, component, z) -> float:
    """P(z_C | do(Pa(C) = z_Pa(C))) with every latent marginalized."""
    s = tuple(sorted(component))
    pa, table = true_component_table(model, s)
    pa_mask = sum(int(z[p]) << b for b, p in enumerate(pa))
    z_mask = sum(int(z[v]) << b for b, v in enumerate(s))
    return float(table[pa_mask, z_mask])


def factorize_c_component(model: CausalModel, a, component, z, joint=None) -> float:
    """Product over members of P(z_j | z_Pa'(j), do(a)), by exhaustive enumeration.

    Should equal ``c_component_probability`` for every component of ``a``.
    ``joint`` may carry a precomputed ``interventional_joint(model, a)``.
    """
    comp = tuple(sorted(component))
    if joint is None:
        joint = interventional_joint(model, a)
    codes = np.arange(joint.size, dtype=np.int64)
    z = [int(v) for v in z]
    result = 1.0
    for pos, v in enumerate(comp):
        cond = pseudo_parents(model.graph, comp, pos)
        mask = sum(1 << p for p in cond)
        target = sum(z[p] << p for p in cond)
        den_sel = (codes & mask) == target
        den = joint[den_sel].sum()
        num = joint[den_sel & (((codes >> v) & 1) == z[v])].sum()
        if den == 0.0:
            raise ZeroDivisionError(f"conditioning event for vertex {v} has probability zero")
        result *= num / den
    return float(result)
