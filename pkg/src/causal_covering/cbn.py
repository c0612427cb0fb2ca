"""Causal graphs, Bernoulli mechanisms, interventional sampling and exact oracles.

Vertices are indexed ``0..N-1`` in topological order and the reward is the
last vertex.  An intervention is an ``int8`` vector with ``UNSET`` (-1) for
free coordinates and 0/1 for forced ones.

Conditional probability tables are dense and indexed by a parent bitmask.
Latent parents come first in topological order, so they take the low bits
(in the order of ``model.latents``); observed parents follow in ascending
index order.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import (
    BadEdge,
    CycleDetected,
    GraphError,
    LatentHasParents,
    LatentSingleChild,
    RewardNotLast,
    TooLargeForExactOracle,
)

UNSET = -1
DEFAULT_ENUMERATION_CAP = 1 << 22
_SAMPLE_CHUNK = 1 << 15


# -- interventions -----------------------------------------------------------

def empty_intervention(n: int) -> np.ndarray:
    return np.full(n, UNSET, dtype=np.int8)


def make_intervention(n: int, assignments: dict[int, int]) -> np.ndarray:
    a = empty_intervention(n)
    for i, v in assignments.items():
        if v not in (0, 1):
            raise ValueError(f"intervention value must be 0 or 1, got {v!r}")
        a[i] = v
    return a


def parse_intervention(text: str) -> np.ndarray:
    """Parse a string over ``{0, 1, *}`` into an intervention vector."""
    lookup = {"0": 0, "1": 1, "*": UNSET}
    try:
        return np.array([lookup[c] for c in text.strip()], dtype=np.int8)
    except KeyError as exc:
        raise ValueError(f"bad intervention character {exc.args[0]!r} in {text!r}") from None


def format_intervention(a) -> str:
    return "".join("*" if v == UNSET else str(int(v)) for v in a)


def free_vertices(a) -> list[int]:
    return [i for i, v in enumerate(a) if v == UNSET]


def complies(z, a) -> bool:
    """True when assignment ``z`` agrees with ``a`` on every forced coordinate."""
    a = np.asarray(a)
    z = np.asarray(z)
    forced = a != UNSET
    return bool(np.all(z[forced] == a[forced]))


# -- graph -------------------------------------------------------------------

@dataclass(frozen=True)
class CausalGraph:
    """Observed DAG plus optional bidirected (confounded) pairs.

    Validated on construction; derived fields ``parents``, ``children``,
    ``max_in_degree`` and ``max_c_component_size`` are filled in then.
    """

    n_observed: int
    directed_edges: tuple = ()
    bidirected_edges: tuple = ()
    reward_vertex: Optional[int] = None
    parents: tuple = field(init=False, repr=False, compare=False)
    children: tuple = field(init=False, repr=False, compare=False)
    max_in_degree: int = field(init=False, repr=False, compare=False)
    max_c_component_size: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "directed_edges", tuple((int(p), int(c)) for p, c in self.directed_edges))
        set_(self, "bidirected_edges",
             tuple(sorted(tuple(sorted((int(u), int(v)))) for u, v in self.bidirected_edges)))
        if self.reward_vertex is None:
            set_(self, "reward_vertex", self.n_observed - 1)
        d, ell = validate_graph(self)
        parents = [[] for _ in range(self.n_observed)]
        children = [[] for _ in range(self.n_observed)]
        for p, c in self.directed_edges:
            parents[c].append(p)
            children[p].append(c)
        set_(self, "parents", tuple(tuple(sorted(ps)) for ps in parents))
        set_(self, "children", tuple(tuple(sorted(cs)) for cs in children))
        set_(self, "max_in_degree", d)
        set_(self, "max_c_component_size", ell)

    @property
    def n(self) -> int:
        return self.n_observed

    @property
    def is_semi_markovian(self) -> bool:
        return bool(self.bidirected_edges)

    def bidirected_neighbors(self) -> list[set]:
        nb = [set() for _ in range(self.n_observed)]
        for u, v in self.bidirected_edges:
            nb[u].add(v)
            nb[v].add(u)
        return nb


def validate_graph(graph: CausalGraph) -> tuple[int, int]:
    """Check DAG-ness, topological indexing, reward placement and bidirected edges.

    Returns ``(d, ell)``: the maximum in-degree and the largest c-component size.
    """
    n = graph.n_observed
    if n < 1:
        raise GraphError("graph needs at least one vertex")
    seen = set()
    indeg = [0] * n
    out = [[] for _ in range(n)]
    for p, c in graph.directed_edges:
        if not (0 <= p < n and 0 <= c < n):
            raise BadEdge(f"edge ({p}, {c}) out of range")
        if p == c:
            raise BadEdge(f"self loop on vertex {p}")
        if (p, c) in seen:
            raise BadEdge(f"duplicate edge ({p}, {c})")
        seen.add((p, c))
        indeg[c] += 1
        out[p].append(c)

    remaining = list(indeg)
    queue = deque(i for i in range(n) if remaining[i] == 0)
    visited = 0
    while queue:
        u = queue.popleft()
        visited += 1
        for c in out[u]:
            remaining[c] -= 1
            if remaining[c] == 0:
                queue.append(c)
    if visited != n:
        raise CycleDetected("directed edges contain a cycle")
    for p, c in graph.directed_edges:
        if p > c:
            raise BadEdge(f"edge ({p}, {c}) does not respect the topological indexing")
    if graph.reward_vertex != n - 1:
        raise RewardNotLast(f"reward vertex {graph.reward_vertex} is not the last vertex {n - 1}")

    bseen = set()
    for u, v in graph.bidirected_edges:
        if not (0 <= u < n and 0 <= v < n):
            raise BadEdge(f"bidirected edge ({u}, {v}) out of range")
        if u == v:
            raise BadEdge(f"bidirected self edge on {u}")
        key = (min(u, v), max(u, v))
        if key in bseen:
            raise BadEdge(f"duplicate bidirected edge {key}")
        bseen.add(key)

    d = max(indeg) if n else 0
    comps = _components(n, graph.bidirected_edges, range(n))
    ell = max((len(c) for c in comps), default=0)
    return d, ell


def _components(n, bidirected, allowed) -> list[tuple]:
    allowed = set(allowed)
    nb = {i: [] for i in allowed}
    for u, v in bidirected:
        if u in allowed and v in allowed:
            nb[u].append(v)
            nb[v].append(u)
    comps = []
    done = set()
    for s in sorted(allowed):
        if s in done:
            continue
        stack = [s]
        done.add(s)
        comp = []
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in nb[u]:
                if w not in done:
                    done.add(w)
                    stack.append(w)
        comps.append(tuple(sorted(comp)))
    return comps


def c_components(graph: CausalGraph, a=None) -> list[tuple]:
    """Partition the free vertices of ``a`` into bidirected-connected components.

    Components are ordered by their first member and sorted internally.
    """
    if a is None:
        allowed = range(graph.n_observed)
    else:
        allowed = free_vertices(a)
    return _components(graph.n_observed, graph.bidirected_edges, allowed)


def parents_of_set(graph: CausalGraph, vertices) -> tuple:
    """Pa(S): union of the parents of S, minus S itself, sorted."""
    s = set(vertices)
    out = set()
    for v in s:
        out.update(graph.parents[v])
    return tuple(sorted(out - s))


def pseudo_parents(graph: CausalGraph, component: Sequence[int], pos: int) -> tuple:
    """Pseudo parents of the member at 0-based position ``pos`` of a sorted component.

    The parents of the prefix ``component[:pos + 1]`` together with the
    earlier members ``component[:pos]``.
    """
    comp = tuple(component)
    if list(comp) != sorted(comp):
        raise ValueError("component must be sorted topologically")
    if not 0 <= pos < len(comp):
        raise IndexError(pos)
    prefix = comp[: pos + 1]
    result = tuple(sorted(set(parents_of_set(graph, prefix)) | set(comp[:pos])))
    d, ell = graph.max_in_degree, graph.max_c_component_size
    assert len(result) <= d * ell + ell
    assert all(v < comp[pos] for v in result)
    return result


# -- model -------------------------------------------------------------------

@dataclass(frozen=True)
class Latent:
    """Unobserved Bernoulli root confounding its observed children."""

    p: float
    children: tuple
    parents: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(sorted(int(c) for c in self.children)))
        object.__setattr__(self, "parents", tuple(self.parents))


def project_latents(n_observed: int, edges, latents: Sequence[Latent], reward=None) -> CausalGraph:
    bidirected = set()
    for k, lat in enumerate(latents):
        if lat.parents:
            raise LatentHasParents(f"latent {k} has parents {lat.parents}")
        if len(set(lat.children)) < 2:
            raise LatentSingleChild(f"latent {k} has fewer than two observed children")
        for u, v in itertools.combinations(sorted(set(lat.children)), 2):
            bidirected.add((u, v))
    return CausalGraph(n_observed, tuple(edges), tuple(sorted(bidirected)), reward)


def project_to_smbn(model: "CausalModel") -> CausalGraph:
    """Observed subgraph plus one bidirected edge per pair of co-children of a latent."""
    g = model.graph
    return project_latents(g.n_observed, g.directed_edges, model.latents, g.reward_vertex)


@dataclass(frozen=True, eq=False)
class CausalModel:
    """Ground-truth Bernoulli network.

    ``cpts[i][mask]`` is P(V_i = 1 | parents encoded by ``mask``); see the
    module docstring for the bit order.  ``mean_oracle`` optionally supplies a
    closed-form interventional mean for families too large to enumerate.
    """

    graph: CausalGraph
    latents: tuple = ()
    cpts: tuple = ()
    mean_oracle: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "latents", tuple(self.latents))
        set_(self, "cpts", tuple(np.asarray(t, dtype=np.float64).copy() for t in self.cpts))
        g = self.graph
        n, n_lat = g.n_observed, len(self.latents)
        for k, lat in enumerate(self.latents):
            if not 0.0 <= lat.p <= 1.0:
                raise ValueError(f"latent {k} has probability {lat.p} outside [0, 1]")
            if any(not 0 <= c < n for c in lat.children):
                raise BadEdge(f"latent {k} has a child out of range")
        projected = project_to_smbn(self)
        if set(projected.bidirected_edges) != set(g.bidirected_edges):
            raise GraphError("graph bidirected edges do not match the latent structure")
        latent_parents = [[] for _ in range(n)]
        for k, lat in enumerate(self.latents):
            for c in lat.children:
                latent_parents[c].append(k)
        full = tuple(tuple(latent_parents[i]) + tuple(n_lat + p for p in g.parents[i])
                     for i in range(n))
        if len(self.cpts) != n:
            raise ValueError(f"expected {n} CPTs, got {len(self.cpts)}")
        for i, t in enumerate(self.cpts):
            if t.shape != (1 << len(full[i]),):
                raise ValueError(f"CPT of vertex {i} needs {1 << len(full[i])} entries, has {t.size}")
            if np.any(t < 0.0) or np.any(t > 1.0) or np.any(np.isnan(t)):
                raise ValueError(f"CPT of vertex {i} has entries outside [0, 1]")
            t.setflags(write=False)
        set_(self, "full_parents", full)
        sizes = [len(t) for t in self.cpts]
        set_(self, "_par_ptr", np.concatenate([[0], np.cumsum([len(f) for f in full])]).astype(np.int64))
        set_(self, "_par_idx", np.array([p for f in full for p in f], dtype=np.int64))
        set_(self, "_cpt_ptr", np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64))
        set_(self, "_cpt_flat", np.concatenate(self.cpts) if n else np.zeros(0))
        set_(self, "_latent_p", np.array([lat.p for lat in self.latents], dtype=np.float64))

    @classmethod
    def build(cls, n_observed: int, edges, cpts, latents=(), reward=None, mean_oracle=None):
        latents = tuple(l if isinstance(l, Latent) else Latent(**l) for l in latents)
        graph = project_latents(n_observed, edges, latents, reward)
        return cls(graph, latents, tuple(cpts), mean_oracle)

    @property
    def n(self) -> int:
        return self.graph.n_observed


def model_from_dict(doc: dict) -> CausalModel:
    n = int(doc["n_observed"])
    latents = [Latent(float(l["p"]), tuple(l["children"]), tuple(l.get("parents", ())))
               for l in doc.get("latents", [])]
    cpts = doc["cpts"]
    tables = [cpts[str(i)] for i in range(n)]
    return CausalModel.build(n, [tuple(e) for e in doc.get("edges", [])], tables, latents,
                             doc.get("reward"))


def model_to_dict(model: CausalModel) -> dict:
    g = model.graph
    return {
        "n_observed": g.n_observed,
        "edges": [list(e) for e in g.directed_edges],
        "latents": [{"p": l.p, "children": list(l.children)} for l in model.latents],
        "cpts": {str(i): [float(x) for x in t] for i, t in enumerate(model.cpts)},
        "reward": g.reward_vertex,
    }


def load_model(path) -> CausalModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(model: CausalModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


# -- sampling ----------------------------------------------------------------

def sample_batch(model: CausalModel, interventions, rng: np.random.Generator) -> np.ndarray:
    """Draw one sample per row of ``interventions`` (shape ``(n, N)``).

    Returns a ``uint8`` array of observed assignments.
    """
    iv = np.ascontiguousarray(np.atleast_2d(interventions), dtype=np.int8)
    n_rows, n = iv.shape
    if n != model.n:
        raise ValueError(f"intervention length {n} != {model.n}")
    width = len(model.latents) + n
    out = np.empty((n_rows, n), dtype=np.uint8)
    for start in range(0, n_rows, _SAMPLE_CHUNK):
        stop = min(start + _SAMPLE_CHUNK, n_rows)
        u = rng.random((stop - start, width))
        out[start:stop] = kernels.sample_rows(iv[start:stop], u, model._latent_p, model._par_ptr,
                                              model._par_idx, model._cpt_ptr, model._cpt_flat)
    return out


def sample_many(model: CausalModel, a, n: int, rng: np.random.Generator) -> np.ndarray:
    rows = np.broadcast_to(np.asarray(a, dtype=np.int8), (n, model.n))
    return sample_batch(model, rows, rng)


def sample_under_do(model: CausalModel, a, rng: np.random.Generator) -> np.ndarray:
    return sample_batch(model, np.asarray(a, dtype=np.int8)[None, :], rng)[0]


# -- exact enumeration -------------------------------------------------------

def _enumerate_states(model: CausalModel, a, cap: int, chunk: int = 1 << 16):
    """Yield ``(values, prob)`` chunks over every latent/free-observed state under do(a).

    ``values`` has shape ``(m, L + N)`` with latents first.
    """
    a = np.asarray(a, dtype=np.int8)
    n, n_lat = model.n, len(model.latents)
    free = free_vertices(a)
    nbits = n_lat + len(free)
    if (1 << nbits) > cap:
        raise TooLargeForExactOracle(f"2^{nbits} joint states exceeds the cap of {cap}")
    col_of = {v: n_lat + k for k, v in enumerate(free)}
    total = 1 << nbits
    for start in range(0, total, chunk):
        s = np.arange(start, min(start + chunk, total), dtype=np.int64)
        vals = np.empty((s.size, n_lat + n), dtype=np.int64)
        prob = np.ones(s.size)
        for j, lat in enumerate(model.latents):
            vals[:, j] = (s >> j) & 1
            prob *= np.where(vals[:, j] == 1, lat.p, 1.0 - lat.p)
        for i in range(n):
            if a[i] != UNSET:
                vals[:, n_lat + i] = a[i]
                continue
            vals[:, n_lat + i] = (s >> col_of[i]) & 1
            mask = np.zeros(s.size, dtype=np.int64)
            for b, p in enumerate(model.full_parents[i]):
                mask |= vals[:, p] << b
            p1 = model.cpts[i][mask]
            prob *= np.where(vals[:, n_lat + i] == 1, p1, 1.0 - p1)
        yield vals, prob


def true_mean(model: CausalModel, a, cap: int = DEFAULT_ENUMERATION_CAP) -> float:
    """Exact P[V_N = 1 | do(a)].

    Uses the registered closed form when the model has one, otherwise sums the
    joint over every compliant state with latents marginalized.
    """
    a = np.asarray(a, dtype=np.int8)
    r = model.graph.reward_vertex
    if a[r] != UNSET:
        return float(a[r])
    if model.mean_oracle is not None:
        return float(model.mean_oracle(a))
    n_lat = len(model.latents)
    total = 0.0
    for vals, prob in _enumerate_states(model, a, cap):
        total += float(prob[vals[:, n_lat + r] == 1].sum())
    return total


def interventional_joint(model: CausalModel, a, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """Distribution of the observed vertices under do(a), indexed by bitmask (bit i = V_i)."""
    n, n_lat = model.n, len(model.latents)
    if n > 24:
        raise TooLargeForExactOracle("observed joint table too large")
    out = np.zeros(1 << n)
    weights = (1 << np.arange(n, dtype=np.int64))
    for vals, prob in _enumerate_states(model, a, cap):
        codes = vals[:, n_lat:] @ weights
        out += np.bincount(codes, weights=prob, minlength=1 << n)
    return out


def true_component_table(model: CausalModel, subset: Sequence[int]):
    """Exact P(z_S | do(Pa(S) = z_pa)) as ``(parents, table)``.

    ``table[pa_mask, z_mask]`` uses ascending bit order for both parents and
    members.  Only latents with a child in S are marginalized; others cannot
    affect S once its parents are fixed.
    """
    g = model.graph
    s = tuple(sorted(subset))
    pa = parents_of_set(g, s)
    n_lat = len(model.latents)
    lats = sorted({p for v in s for p in model.full_parents[v] if p < n_lat})
    table = np.zeros((1 << len(pa), 1 << len(s)))
    nl = len(lats)
    for lmask in range(1 << nl):
        lw = 1.0
        val = {}
        for b, j in enumerate(lats):
            bit = (lmask >> b) & 1
            val[j] = bit
            lw *= model.latents[j].p if bit else 1.0 - model.latents[j].p
        if lw == 0.0:
            continue
        for pmask in range(1 << len(pa)):
            for b, v in enumerate(pa):
                val[n_lat + v] = (pmask >> b) & 1
            for zmask in range(1 << len(s)):
                w = lw
                for b, v in enumerate(s):
                    val[n_lat + v] = (zmask >> b) & 1
                for v in s:
                    m = 0
                    for b, p in enumerate(model.full_parents[v]):
                        m |= val[p] << b
                    p1 = model.cpts[v][m]
                    w *= p1 if val[n_lat + v] else 1.0 - p1
                table[pmask, zmask] += w
    return pa, table
