"""Randomized covering intervention sets and their exhaustive verifier."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cbn import UNSET, CausalGraph, c_components, format_intervention, parents_of_set
from .errors import CoverConstructionFailed

OBSERVED = "observed"
SMBN = "smbn"


def cover_size_smbn(n: int, d: int, ell: int, horizon: int) -> int:
    """ceil((3d)^ell * 2^(ell*d) * (ln N + 2*ell*d + ln T)); 1 when d == 0."""
    if d == 0:
        return 1
    return math.ceil((3 * d) ** ell * 2 ** (ell * d)
                     * (math.log(n) + 2 * ell * d + math.log(horizon)))


def cover_size_observed(n: int, d: int, horizon: int) -> int:
    return cover_size_smbn(n, d, 1, horizon)


def effective_degree(graph: CausalGraph, smbn: bool) -> int:
    """Degree parameter plugged into the coordinate probabilities.

    With components of size one the SMBN construction is the observed one.
    """
    d, ell = graph.max_in_degree, graph.max_c_component_size
    if not smbn or ell <= 1 or d == 0:
        return d
    return min(d * ell + ell, graph.n_observed - 1)


def coordinate_probability(d: int) -> float:
    """Probability of each of the values 0 and 1 for a single coordinate."""
    return d / (2 * (1 + d))


def cover_size_for(graph: CausalGraph, horizon: int, smbn: bool) -> int:
    d, ell = graph.max_in_degree, graph.max_c_component_size
    n = graph.n_observed
    if smbn:
        return cover_size_smbn(n, d, max(ell, 1), horizon)
    return cover_size_observed(n, d, horizon)


@dataclass
class CoverSet:
    interventions: np.ndarray
    kind: str
    k_target: int
    attempts: int = 1

    def __len__(self):
        return len(self.interventions)

    def as_strings(self) -> list[str]:
        return [format_intervention(row) for row in self.interventions]


@dataclass
class CoverCertificate:
    covered: bool
    missing: list = field(default_factory=list)


def cover_targets(graph: CausalGraph, smbn: bool) -> list[tuple]:
    """Every ``(S, Pa(S))`` pair the cover must witness."""
    if not smbn:
        return [((i,), graph.parents[i]) for i in range(graph.n_observed)]
    out = []
    for comp in c_components(graph):
        for r in range(1, len(comp) + 1):
            for s in itertools.combinations(comp, r):
                out.append((s, parents_of_set(graph, s)))
    return out


def verify_cover(graph: CausalGraph, cover, smbn: bool | None = None) -> CoverCertificate:
    """Exhaustively check every (target, parent assignment) pair.

    ``missing`` lists ``(S, ((parent, value), ...))`` for each uncovered pair.
    """
    if isinstance(cover, CoverSet):
        rows = cover.interventions
        if smbn is None:
            smbn = cover.kind == SMBN
    else:
        rows = np.asarray(cover, dtype=np.int8)
    if smbn is None:
        smbn = graph.is_semi_markovian
    rows = np.atleast_2d(rows)
    missing = []
    for s, pa in cover_targets(graph, smbn):
        ok = np.all(rows[:, list(s)] == UNSET, axis=1)
        if pa:
            ok &= np.all(rows[:, list(pa)] != UNSET, axis=1)
        seen = set()
        if ok.any():
            sub = rows[ok][:, list(pa)].astype(np.int64)
            codes = sub @ (1 << np.arange(len(pa), dtype=np.int64)) if pa else np.zeros(len(sub), np.int64)
            seen = set(np.unique(codes).tolist())
        for code in range(1 << len(pa)):
            if code not in seen:
                missing.append((s, tuple((p, (code >> b) & 1) for b, p in enumerate(pa))))
    return CoverCertificate(not missing, missing)


def draw_interventions(n_rows: int, n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    q = coordinate_probability(d)
    u = rng.random((n_rows, n))
    return np.where(u < q, 0, np.where(u < 2 * q, 1, UNSET)).astype(np.int8)


def construct_cover(graph: CausalGraph, horizon: int, rng: np.random.Generator,
                    smbn: bool | None = None, max_retries: int = 16) -> CoverSet:
    """Draw a random covering set, resampling wholesale until it verifies."""
    if smbn is None:
        smbn = graph.is_semi_markovian
    kind = SMBN if smbn else OBSERVED
    k = cover_size_for(graph, horizon, smbn)
    d_eff = effective_degree(graph, smbn)
    for attempt in range(1, max_retries + 2):
        if graph.max_in_degree == 0:
            rows = np.full((1, graph.n_observed), UNSET, dtype=np.int8)
        else:
            rows = draw_interventions(k, graph.n_observed, d_eff, rng)
        cover = CoverSet(rows, kind, k, attempt)
        if verify_cover(graph, cover).covered:
            return cover
    raise CoverConstructionFailed(f"no covering set after {max_retries} resamples of size {k}")
