"""Characteristic-based parametric portfolio policies.

Estimation of characteristic-linked portfolio weight rules by CRRA utility
maximization, cross-sectional bootstrap resampling, out-of-sample evaluation
(certainty equivalents, robust moments, dominance ranking) and Fama-French-
Carhart variance decomposition. The heavy lifting lives in the compiled
`ppolicy._core` extension.
"""

from ppolicy._core import (  # noqa: F401
    CE_SENTINEL_BP,
    CrossSection,
    Panel,
    PolicyTheta,
    RawPanel,
    __version__,
    certainty_equivalent,
    dominates,
    draw_pseudosample,
    export_density,
    gradient,
    load_panel_csv,
    objective,
    optimize_theta,
    portfolio_return,
    portfolio_weights,
    quantile,
    rank_rules,
    regress_ffc,
    robust_moments,
    run_experiment,
    run_protocol,
    sharpe_annualized,
    standardize,
    summarize,
    synthetic_panel,
    variance_decomposition,
    weak_signal_panel,
    write_panel_csv,
)
