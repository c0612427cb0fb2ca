"""Bandit agents: covering interventions and the two baselines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .cbn import CausalGraph, CausalModel, parse_intervention, sample_batch, true_mean
from .covering import construct_cover, cover_size_for
from .errors import BudgetExceeded, HorizonTooSmall
from .estimation import (
    OBSERVED,
    SMBN,
    SampleStore,
    finalize,
    plugin_means,
    required_subsets,
)


class Environment:
    """Hides the model; agents may only intervene and observe.

    ``budget`` caps the total number of draws (``None`` = unlimited).
    """

    def __init__(self, model: CausalModel, budget: int | None = None):
        self._model = model
        self.budget = budget
        self.draws = 0

    @property
    def graph(self) -> CausalGraph:
        return self._model.graph

    def sample(self, interventions, rng: np.random.Generator) -> np.ndarray:
        rows = np.atleast_2d(interventions)
        if self.budget is not None and self.draws + len(rows) > self.budget:
            raise BudgetExceeded(f"{self.draws} + {len(rows)} draws exceeds budget {self.budget}")
        self.draws += len(rows)
        return sample_batch(self._model, rows, rng)


def as_arm_matrix(arms, n: int | None = None) -> np.ndarray:
    rows = [parse_intervention(a) if isinstance(a, str) else np.asarray(a, dtype=np.int8) for a in arms]
    if not rows:
        raise ValueError("arm set is empty")
    mat = np.vstack(rows).astype(np.int8)
    if n is not None and mat.shape[1] != n:
        raise ValueError(f"arms have length {mat.shape[1]}, graph has {n} vertices")
    return mat


@dataclass
class RunResult:
    chosen_index: int
    chosen: np.ndarray
    muhat: np.ndarray
    rounds_used: int
    details: dict[str, Any] = field(default_factory=dict)


def _split(total: int, parts: int) -> np.ndarray:
    counts = np.full(parts, total // parts, dtype=np.int64)
    counts[: total % parts] += 1
    return counts


def _result(arms: np.ndarray, muhat: np.ndarray, rounds: int, **details) -> RunResult:
    best = int(np.argmax(muhat))  # first maximum: ties go to the lowest index
    return RunResult(best, arms[best].copy(), muhat, rounds, details)


def explore_with_cover(env: Environment, arms, horizon: int, rng: np.random.Generator,
                       smbn: bool | None = None, max_retries: int = 16):
    """Exploration phase of the covering algorithm; returns ``(cover, store)``."""
    graph = env.graph
    if smbn is None:
        smbn = graph.is_semi_markovian
    k = cover_size_for(graph, horizon, smbn)
    if horizon < k:
        raise HorizonTooSmall(f"horizon {horizon} is smaller than the cover size {k}")
    cover = construct_cover(graph, horizon, rng, smbn=smbn, max_retries=max_retries)
    counts = _split(horizon, len(cover))
    rows = np.repeat(cover.interventions, counts, axis=0)
    samples = env.sample(rows, rng)
    if smbn:
        store = SampleStore(graph, SMBN, required_subsets(graph, arms))
    else:
        store = SampleStore(graph, OBSERVED)
    store.record_batch(rows, samples)
    store.add_rounds(cover.interventions, counts)
    return cover, store


def covering_interventions(env: Environment, arms, horizon: int, rng: np.random.Generator,
                           smbn: bool | None = None, max_retries: int = 16) -> RunResult:
    """Explore with a covering set, estimate every arm by plug-in inference, return the best."""
    arms = as_arm_matrix(arms, env.graph.n_observed)
    cover, store = explore_with_cover(env, arms, horizon, rng, smbn, max_retries)
    tables = finalize(store)
    muhat = plugin_means(tables, env.graph, arms)
    return _result(arms, muhat, horizon, cover=cover, tables=tables)


def direct_exploration(env: Environment, arms, horizon: int, rng: np.random.Generator) -> RunResult:
    """Pull every arm equally often and return the best empirical reward mean."""
    arms = as_arm_matrix(arms, env.graph.n_observed)
    if horizon < len(arms):
        raise HorizonTooSmall(f"horizon {horizon} is smaller than the {len(arms)} arms")
    counts = _split(horizon, len(arms))
    rows = np.repeat(arms, counts, axis=0)
    rewards = env.sample(rows, rng)[:, env.graph.reward_vertex].astype(np.float64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    muhat = np.add.reduceat(rewards, starts) / counts
    return _result(arms, muhat, horizon)


def prop_inf_uniform(env: Environment, arms, horizon: int, rng: np.random.Generator) -> RunResult:
    """Uniform allocation over the arms with observational pooling of every sample.

    A sample credits vertex ``i`` whenever ``i`` is free in the executed arm,
    keyed by the realized parent values. Bidirected edges are ignored.
    """
    arms = as_arm_matrix(arms, env.graph.n_observed)
    if horizon < len(arms):
        raise HorizonTooSmall(f"horizon {horizon} is smaller than the {len(arms)} arms")
    counts = _split(horizon, len(arms))
    rows = np.repeat(arms, counts, axis=0)
    samples = env.sample(rows, rng)
    store = SampleStore(env.graph, OBSERVED)
    store.record_batch(rows, samples, pooled=True)
    store.add_rounds(arms, counts)
    tables = finalize(store)
    muhat = plugin_means(tables, env.graph, arms)
    return _result(arms, muhat, horizon, tables=tables)


AGENTS = {
    "covering": covering_interventions,
    "direct": direct_exploration,
    "propinf": prop_inf_uniform,
}


def simple_regret(model: CausalModel, chosen, arms, means=None) -> float:
    """Best true mean in the arm set minus the true mean of ``chosen``."""
    arms = as_arm_matrix(arms, model.n)
    if means is None:
        means = [true_mean(model, a) for a in arms]
    return float(max(means) - true_mean(model, chosen))
