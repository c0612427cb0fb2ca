"""Causal bandits with covering interventions: simulation, estimation and benchmarks."""
from .algorithms import (
    Environment,
    RunResult,
    covering_interventions,
    direct_exploration,
    prop_inf_uniform,
    simple_regret,
)
from .cbn import (
    UNSET,
    CausalGraph,
    CausalModel,
    Latent,
    c_components,
    empty_intervention,
    format_intervention,
    make_intervention,
    parse_intervention,
    project_to_smbn,
    pseudo_parents,
    sample_under_do,
    true_mean,
    validate_graph,
)
from .covering import (
    CoverCertificate,
    CoverSet,
    construct_cover,
    cover_size_observed,
    cover_size_smbn,
    verify_cover,
)
from .estimation import (
    PluginTables,
    SampleStore,
    delta_p,
    factorize_c_component,
    finalize,
    plugin_mean,
    record_sample,
)
from .harness import (
    ExperimentConfig,
    OrTreeSpec,
    RegretReport,
    aggregate,
    build_or_tree,
    or_tree_true_mean,
    run_experiment,
)
from .kernels import BACKEND

__version__ = "0.1.0"
