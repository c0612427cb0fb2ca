import numpy as np
import pytest

from causal_covering.cbn import (
    CausalGraph,
    CausalModel,
    Latent,
    c_components,
    interventional_joint,
    make_intervention,
    parse_intervention,
    true_mean,
)
from causal_covering.errors import InsufficientCoverage
from causal_covering.estimation import (
    OBSERVED,
    SMBN,
    PluginTables,
    SampleStore,
    c_component_probability,
    delta_p,
    factorize_c_component,
    finalize,
    plugin_mean,
    plugin_means,
    record_sample,
    required_subsets,
    tables_from_model,
)

from _testmodels import (
    brute_plugin_mean,
    compliant_assignments,
    random_intervention,
    random_model,
)


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


CHAIN = CausalGraph(2, [(0, 1)])


def chain_tables(p0=0.4, p1=(0.2, 0.9)):
    return PluginTables(OBSERVED, {(0,): (), (1,): (0,)},
                        {(0,): np.array([[1 - p0, p0]]),
                         (1,): np.array([[1 - p1[0], p1[0]], [1 - p1[1], p1[1]]])})


# -- attribution -----------------------------------------------------------------

def test_attribution_requires_intervened_parents():
    store = SampleStore(CHAIN)
    record_sample(store, parse_intervention("1*"), [1, 1])
    assert store.counts[(1,)].tolist() == [[0, 0], [0, 1]]
    assert store.counts[(0,)].sum() == 0


def test_empty_intervention_credits_only_roots():
    g = CausalGraph(4, [(0, 2), (1, 3), (2, 3)])
    store = SampleStore(g)
    record_sample(store, parse_intervention("****"), [1, 0, 1, 1])
    assert store.counts[(0,)].tolist() == [[0, 1]]
    assert store.counts[(1,)].tolist() == [[1, 0]]
    assert store.counts[(2,)].sum() == 0
    assert store.counts[(3,)].sum() == 0


def test_smbn_attribution_by_hand():
    g = CausalGraph(3, [(0, 1), (1, 2)], [(0, 2)])
    store = SampleStore(g, SMBN, [(0, 2)])
    assert store.parents[(0, 2)] == (1,)
    record_sample(store, make_intervention(3, {1: 0}), [1, 0, 1])
    assert store.counts[(0, 2)][0, 0b11] == 1
    assert store.counts[(0, 2)].sum() == 1


def test_pooled_attribution_uses_realized_parents():
    store = SampleStore(CHAIN)
    record_sample(store, parse_intervention("**"), [1, 0], pooled=True)
    assert store.counts[(0,)].tolist() == [[0, 1]]
    assert store.counts[(1,)].tolist() == [[0, 0], [1, 0]]


def test_batch_equals_single_records():
    r = rng(5)
    m = random_model(r, 7, 2)
    rows = np.vstack([random_intervention(r, 7, 0.5) for _ in range(300)])
    z = r.integers(0, 2, size=rows.shape).astype(np.uint8)
    for pooled in (False, True):
        a, b = SampleStore(m.graph), SampleStore(m.graph)
        a.record_batch(rows, z, pooled)
        for row, sample in zip(rows, z):
            record_sample(b, row, sample, pooled)
        for s in a.counts:
            assert np.array_equal(a.counts[s], b.counts[s])


def test_smbn_store_needs_targets():
    with pytest.raises(ValueError):
        SampleStore(CHAIN, SMBN)


# -- finalize ---------------------------------------------------------------------

def test_ratio_estimate():
    store = SampleStore(CausalGraph(1, []))
    store.counts[(0,)][0] = [1, 3]
    assert store.n_total(0, 0) == 4 and store.n_one(0, 0) == 3
    assert finalize(store).p_hat(0, 0) == 0.75


def test_zero_count_default_and_warning():
    store = SampleStore(CHAIN)
    store.counts[(0,)][0] = [5, 5]
    tables = finalize(store)
    assert tables.p_hat(1, 0) == 0.5
    assert ((1,), 0) in tables.warnings and ((1,), 1) in tables.warnings
    assert ((0,), 0) not in tables.warnings


def test_smbn_normalization():
    g = CausalGraph(2, [], [(0, 1)])
    store = SampleStore(g, SMBN, [(0, 1)])
    store.counts[(0, 1)][0] = [2, 0, 0, 2]
    assert finalize(store).q_hat((0, 1), 0).tolist() == [0.5, 0.0, 0.0, 0.5]


# -- plug-in means ---------------------------------------------------------------------

def test_plugin_hand_enumeration():
    assert plugin_mean(chain_tables(), CHAIN, parse_intervention("**")) == pytest.approx(0.48, abs=1e-15)


def test_plugin_single_factor():
    assert plugin_mean(chain_tables(), CHAIN, parse_intervention("1*")) == pytest.approx(0.9, abs=1e-15)


def test_plugin_intervened_reward():
    assert plugin_mean(chain_tables(), CHAIN, parse_intervention("*0")) == 0.0


def test_plugin_with_true_tables_is_true_mean():
    r = rng(12)
    for _ in range(15):
        n = int(r.integers(2, 9))
        m = random_model(r, n, 3)
        tables = tables_from_model(m)
        for _ in range(5):
            a = random_intervention(r, n)
            assert plugin_mean(tables, m.graph, a) == pytest.approx(true_mean(m, a), abs=1e-12)


def test_smbn_plugin_with_true_tables_is_true_mean():
    r = rng(13)
    for _ in range(15):
        n = int(r.integers(2, 8))
        m = random_model(r, n, 2, ell_max=3)
        arms = [random_intervention(r, n) for _ in range(5)]
        tables = tables_from_model(m, SMBN, required_subsets(m.graph, arms))
        got = plugin_means(tables, m.graph, arms)
        want = [true_mean(m, a) for a in arms]
        assert np.allclose(got, want, atol=1e-12)


def test_plugin_matches_literal_sum():
    r = rng(14)
    for _ in range(20):
        n = int(r.integers(2, 8))
        m = random_model(r, n, 2, ell_max=3)
        arms = [random_intervention(r, n) for _ in range(3)]
        mode = SMBN if m.graph.is_semi_markovian else OBSERVED
        targets = required_subsets(m.graph, arms) if mode == SMBN else None
        tables = tables_from_model(m, mode, targets)
        # perturb so the tables are no longer the truth
        for s, q in tables.tables.items():
            q *= r.uniform(0.5, 1.5, size=q.shape)
            q /= q.sum(axis=1, keepdims=True)
        for a in arms:
            assert plugin_mean(tables, m.graph, a) == pytest.approx(
                brute_plugin_mean(tables, m.graph, a), abs=1e-12)


def test_missing_table_raises():
    tables = chain_tables()
    del tables.parents[(1,)]
    with pytest.raises(InsufficientCoverage):
        plugin_mean(tables, CHAIN, parse_intervention("**"))


# -- estimation error -------------------------------------------------------------------

def test_delta_p_zero_for_truth():
    m = random_model(rng(2), 6, 2)
    assert delta_p(tables_from_model(m), m) == 0.0


def test_delta_p_single_key():
    m = CausalModel.build(1, [], [[0.5]])
    tables = PluginTables(OBSERVED, {(0,): ()}, {(0,): np.array([[0.25, 0.75]])})
    assert delta_p(tables, m) == 0.25


# -- c-component factorization ----------------------------------------------------------------

def test_singleton_component_is_ordinary_conditional():
    m = CausalModel.build(2, [(0, 1)], [[0.4], [0.2, 0.9]])
    z = [1, 1]
    assert c_component_probability(m, (1,), z) == pytest.approx(0.9, abs=1e-15)
    assert factorize_c_component(m, parse_intervention("**"), (1,), z) == pytest.approx(0.9, abs=1e-15)


def test_shared_latent_pair_all_outcomes():
    # V0 and V1 copy their common latent with noise
    m = CausalModel.build(2, [], [[0.1, 0.8], [0.3, 0.6]], [Latent(0.5, (0, 1))])
    a = parse_intervention("**")
    joint = interventional_joint(m, a)
    for z in compliant_assignments(a):
        lhs = c_component_probability(m, (0, 1), z)
        brute = sum(0.5 * (p0 if z[0] else 1 - p0) * (p1 if z[1] else 1 - p1)
                    for p0, p1 in ((0.1, 0.3), (0.8, 0.6)))
        assert lhs == pytest.approx(brute, abs=1e-15)
        assert factorize_c_component(m, a, (0, 1), z, joint) == pytest.approx(lhs, abs=1e-12)


def test_factorization_random_latent_models():
    r = rng(31)
    for _ in range(10):
        n = int(r.integers(3, 7))
        m = random_model(r, n, 2, ell_max=3)
        a = random_intervention(r, n)
        joint = interventional_joint(m, a)
        for comp in c_components(m.graph, a):
            for z in compliant_assignments(a):
                assert factorize_c_component(m, a, comp, z, joint) == pytest.approx(
                    c_component_probability(m, comp, z), abs=1e-12)
