"""Time-varying VAR estimation and the time-varying degree of market efficiency."""

__version__ = "0.1.0"

from .dataio import (  # noqa: E402
    CsvLayout,
    DescriptiveStats,
    PricePanel,
    ReturnsPanel,
    describe,
    load_price_panel,
    load_returns_panel,
    to_log_returns,
)
from .efficiency import (  # noqa: E402
    Band,
    ZetaSeries,
    attach_band,
    bootstrap_band,
    efficiency_degree,
    long_run_multiplier,
    mc_band,
    spectral_distance,
)
from .exceptions import (  # noqa: E402
    CsvParseError,
    DataDomainError,
    FrequencyError,
    InsufficientDataError,
    NumericalError,
    SingularMultiplierError,
    TvmeError,
)
from .tvvar import (  # noqa: E402
    StackedSystem,
    TvVarEstimate,
    build_stacked_system,
    fit_tvvar,
    solve_stacked,
)
from .unitroot import UnitRootResult, adf_gls_test, gls_detrend, select_adf_lag_mbic  # noqa: E402
from .var import (  # noqa: E402
    ConstancyResult,
    VarEstimate,
    fit_var,
    hansen_lc,
    newey_west_cov,
    select_var_lag_bic,
)
