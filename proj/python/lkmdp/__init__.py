"""Optimistic learning on linear kernel MDPs (Python bindings)."""

from ._core import (  # noqa: F401
    ConfigError,
    InfeasibleError,
    LinearKernelMdp,
    RidgeDesign,
    UnsupportedOperation,
    beta_radius,
    env_from_json,
    epoch_bound,
    hard_mdp_closed_form,
    list_presets,
    loglog_slope,
    make_hard_env,
    make_preset,
    make_tabular_env,
    mc_phi_v,
    normalize_config,
    optimal_values,
    policy_value,
    regret_lower_bound,
    run_experiment,
    run_uclk,
    sc_to_regret,
    u_rounds,
)

__version__ = "0.1.0"
