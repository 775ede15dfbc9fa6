"""Quantile-based global monitoring of many data streams.

Local CUSUM-type statistics run on each stream from steady-state initial
states; a global statistic compares their order statistics with expected
quantiles and raises an alarm when it crosses a calibrated control limit.
"""

from .arl import (
    ArlRow,
    CalibrationError,
    MonitorScheme,
    RecordMaxTrace,
    RunRecord,
    arl1_table,
    arl_at,
    calibrate,
    calibrate_from_traces,
    calibrate_many,
    g_trace,
    initial_state,
    make_global,
    run_lengths,
    simulate_ic_trace,
    simulate_ic_traces,
    simulate_oc_run,
)
from .global_stats import (
    MaxStat,
    QuantileGt,
    SoftThreshold,
    SumStat,
    ZouGz,
    g_max,
    g_sum,
    gl_soft,
    gt,
    gtz,
    logistic_quantile_transform,
    logistic_table,
)
from .local import (
    AdaptiveCusumState,
    AdaptiveFamily,
    AdaptiveParams,
    CusumFamily,
    CusumParams,
    CusumState,
    adaptive_cusum_step,
    adaptive_mu_hats,
    adaptive_stat,
    cusum_oracle,
    cusum_step,
)
from .nonparametric import (
    NonparametricFamily,
    NpParams,
    NpState,
    np_indicators,
    np_init,
    np_stat,
    np_step,
    np_thresholds,
)
from .pool import (
    PoolConfig,
    QuantileTable,
    SteadyStatePool,
    draw_initial_state,
    empirical_cdf,
    expected_quantiles,
    generate_pool,
    load_pool,
    quantile_positions,
    save_pool,
)
from .report import emit_report
from .streams import (
    DistributionKind,
    DistributionSpec,
    OcKind,
    ScenarioConfig,
    StreamSpec,
    build_scenario,
    sample_observation,
    standardization_constants,
    substream,
)

__version__ = "0.1.0"
