import numpy as np
import pytest
from causal_covering.algorithms import (
    Environment,
    as_arm_matrix,
    covering_interventions,
    direct_exploration,
    prop_inf_uniform,
    simple_regret,
)
from causal_covering.cbn import CausalModel, Latent, parse_intervention
from causal_covering.covering import cover_size_for
from causal_covering.errors import BudgetExceeded, HorizonTooSmall
from causal_covering.harness import OrTreeSpec, build_or_tree

from _testmodels import random_intervention, random_model


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def certain_reward_model():
    # V2 = 1 no matter what
    return CausalModel.build(3, [(0, 2), (1, 2)], [[0.5], [0.5], [1.0, 1.0, 1.0, 1.0]])


def test_budget_is_enforced():
    env = Environment(certain_reward_model(), budget=10)
    env.sample(np.full((10, 3), -1, dtype=np.int8), rng())
    with pytest.raises(BudgetExceeded):
        env.sample(np.full((1, 3), -1, dtype=np.int8), rng())


def test_arm_strings_are_parsed():
    assert as_arm_matrix(["1**", "*0*"]).tolist() == [[1, -1, -1], [-1, 0, -1]]
    with pytest.raises(ValueError):
        as_arm_matrix(["1*"], 3)


# -- covering interventions ---------------------------------------------------------

def test_single_arm_is_returned():
    m = random_model(rng(1), 5, 2)
    res = covering_interventions(Environment(m), ["1****"], 4096, rng(2))
    assert res.chosen_index == 0
    assert res.chosen.tolist() == parse_intervention("1****").tolist()


def test_ties_go_to_first_arm():
    m = certain_reward_model()
    arms = ["0**", "1**", "*1*", "01*"]
    res = covering_interventions(Environment(m), arms, 1024, rng())
    assert np.all(res.muhat == 1.0)
    assert res.chosen_index == 0


def test_rounds_are_split_round_robin():
    m = random_model(rng(3), 6, 2)
    env = Environment(m, budget=5000)
    res = covering_interventions(env, ["1*****", "0*****"], 5000, rng(4))
    assert env.draws == 5000 == res.rounds_used
    cover = res.details["cover"]
    k = len(cover)
    assert k == cover_size_for(m.graph, 5000, smbn=False)
    assert sorted(res.details["tables"].parents) == [(i,) for i in range(6)]


def test_horizon_below_cover_size():
    m = random_model(rng(3), 6, 2)
    with pytest.raises(HorizonTooSmall):
        covering_interventions(Environment(m), ["1*****"], 10, rng())


def test_smbn_models_use_component_tables():
    m = CausalModel.build(3, [(0, 1), (1, 2)], [[0.3, 0.7], [0.2, 0.8], [0.1, 0.5, 0.4, 0.9]],
                          [Latent(0.5, (0, 2))])
    res = covering_interventions(Environment(m), ["*0*", "*1*", "0**"], 20000, rng(5))
    assert res.details["cover"].kind == "smbn"
    assert (0, 2) in res.details["tables"].tables
    assert res.chosen_index == 1


def test_or_tree_regret_small_at_large_horizon():
    spec = OrTreeSpec(h=5)
    model, arms = build_or_tree(spec)
    means = [model.mean_oracle(a) for a in arms]
    regrets = []
    for run in range(200):
        r = rng(10_000 + run)
        res = covering_interventions(Environment(model, budget=65536), arms, 65536, r)
        regrets.append(simple_regret(model, res.chosen, arms, means))
    assert np.mean(regrets) <= 0.01


# -- direct exploration ----------------------------------------------------------------

def test_direct_separates_with_one_sample_each():
    m = CausalModel.build(2, [(0, 1)], [[0.5], [0.0, 1.0]])
    res = direct_exploration(Environment(m), ["0*", "1*"], 2, rng())
    assert res.chosen_index == 1


def test_direct_uses_exact_budget():
    m = random_model(rng(6), 5, 2)
    env = Environment(m, budget=1001)
    direct_exploration(env, ["1****", "0****", "*1***"], 1001, rng())
    assert env.draws == 1001


def test_direct_horizon_below_arm_count():
    with pytest.raises(HorizonTooSmall):
        direct_exploration(Environment(certain_reward_model()), ["0**", "1**"], 1, rng())


def test_direct_deterministic_tie():
    res = direct_exploration(Environment(certain_reward_model()), ["0**", "1**", "*0*"], 30, rng())
    assert res.chosen_index == 0


def test_direct_symmetric_arms_chosen_uniformly():
    # every arm has reward mean 0.5 and noisy samples
    m = CausalModel.build(3, [], [[0.5], [0.5], [0.5]])
    arms = ["0**", "1**", "*0*", "*1*"]
    counts = np.zeros(4, dtype=int)
    for seed in range(1000):
        counts[direct_exploration(Environment(m), arms, 4000, rng(seed)).chosen_index] += 1
    n, p = 1000, 0.25
    sd = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sd)


# -- PropInf ------------------------------------------------------------------------------

def test_propinf_edgeless_pooling_is_marginal():
    m = CausalModel.build(3, [], [[0.3], [0.6], [0.45]])
    arms = ["0**", "1**", "*1*"]
    env = Environment(m)
    res = prop_inf_uniform(env, arms, 3000, rng(8))
    # with no parents every free coordinate is pooled into one marginal
    rows = np.repeat(as_arm_matrix(arms), 1000, axis=0)
    z = Environment(m).sample(rows, rng(8))
    free = rows == -1
    for i in range(3):
        want = z[free[:, i], i].mean()
        assert res.details["tables"].p_hat(i, 0) == pytest.approx(want, abs=1e-15)
    # arms that leave the reward alone share one estimate
    assert np.all(res.muhat == res.muhat[0])


def test_propinf_deterministic_model_exact():
    m = CausalModel.build(2, [(0, 1)], [[0.0], [0.0, 1.0]])
    res = prop_inf_uniform(Environment(m), ["0*", "1*"], 10, rng())
    assert res.muhat.tolist() == [0.0, 1.0]
    assert res.chosen_index == 1


def test_propinf_uses_exact_budget():
    m = random_model(rng(6), 5, 2)
    env = Environment(m, budget=999)
    prop_inf_uniform(env, ["1****", "0****"], 999, rng())
    assert env.draws == 999


# -- simple regret ---------------------------------------------------------------------

def test_regret_of_best_arm_is_zero():
    m = CausalModel.build(2, [(0, 1)], [[0.5], [0.3, 0.5]])
    assert simple_regret(m, parse_intervention("1*"), ["0*", "1*"]) == 0.0


def test_regret_difference():
    m = CausalModel.build(2, [(0, 1)], [[0.5], [0.3, 0.5]])
    assert simple_regret(m, parse_intervention("0*"), ["0*", "1*"]) == pytest.approx(0.2)


def test_or_tree_suboptimal_regret():
    spec = OrTreeSpec(h=7)
    model, arms = build_or_tree(spec)
    assert simple_regret(model, arms[0], arms) == pytest.approx(0.046946, abs=1e-6)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="at h=5 both agents already have zero regret at T=65536; "
                                       "the ordering only shows at smaller horizons")
def test_propinf_regret_above_covering_at_65536(desk_report):
    from causal_covering.harness import sign_test_worse

    report, _, _ = desk_report
    p, worse, better = sign_test_worse(report.per_run[("propinf", 65536)],
                                       report.per_run[("covering", 65536)])
    assert p < 0.05


@pytest.mark.slow
def test_propinf_regret_above_covering_at_4096(desk_report):
    from causal_covering.harness import sign_test_worse

    report, _, _ = desk_report
    p, worse, better = sign_test_worse(report.per_run[("propinf", 4096)],
                                       report.per_run[("covering", 4096)])
    assert p < 0.05, (worse, better)
