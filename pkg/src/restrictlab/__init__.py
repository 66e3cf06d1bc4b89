"""Restrictiveness and completeness measures for parametric behavioral models.

Two questions about a model family, answered numerically: how much of the
permissible behavior space it can imitate (restrictiveness, via Monte Carlo
over hypothetical mappings), and how much of the predictable structure in
real data it captures (completeness, via K-fold cross-validation normalized
between a naive benchmark and the best achievable fit).
"""

from .core import (
    BinaryLottery,
    Dataset,
    DiscreteJoint,
    Game3x3,
    Mapping,
    Menu,
    ProblemKind,
    ThreeOutcomeLottery,
    check_decomposition,
    discrepancy,
    empirical_error,
    expected_error,
    expected_value,
    naive_mapping,
    normal_quantile,
    obs_losses,
    optimal_mapping,
    uniform_play,
    validate_mapping,
)
from .errors import (
    ConfigError,
    DegenerateDeltas,
    DegenerateTarget,
    InfiniteDivergence,
    NaiveNotWorse,
    NestingViolation,
    NonFinite,
    RejectionBudgetExceeded,
    RestrictlabError,
    ZeroLikelihood,
)
from .samplers import (
    GibbsCeSampler,
    MuSpec,
    build_fosd_order,
    classify_dominance,
    order_violations,
    play_violations,
    sample_ce_mapping,
    sample_mapping,
    sample_play_mapping,
    substream,
)
from .models import (
    CptBinary,
    CptThreeOutcome,
    LogitLevel1,
    LogitPchm,
    Model,
    Pchm,
    TableModel,
    parse_model,
    weighting,
)
from .fit import (
    ItemStats,
    OptConfig,
    fit_model_to_data,
    fit_model_to_mapping,
    fit_unrestricted,
)
from .restrict import (
    RestrictReport,
    SweepResult,
    delta_histogram,
    estimate_restrictiveness,
    expected_delta,
    f_discrepancy,
    fstar_quantile,
    sensitivity_sweep,
    summarize_deltas,
    total_variation,
)
from .complete import (
    CompleteReport,
    GroupCompleteness,
    alt_fstar_discrepancy,
    data_folds,
    estimate_completeness,
    fold_assignment,
    group_completeness,
    kappa_from_cv,
    kfold_cv,
)
from .io_cli import (
    RunConfig,
    builtin_menu,
    dump_mapping_samples,
    load_ce_dataset,
    load_game_dataset,
    make_random_games,
    menu_checksum,
    read_mapping_samples,
    render_report,
    run_cli,
    synthetic_gain_menu,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryLottery",
    "CompleteReport",
    "ConfigError",
    "CptBinary",
    "CptThreeOutcome",
    "Dataset",
    "DegenerateDeltas",
    "DegenerateTarget",
    "DiscreteJoint",
    "Game3x3",
    "GibbsCeSampler",
    "GroupCompleteness",
    "InfiniteDivergence",
    "ItemStats",
    "LogitLevel1",
    "LogitPchm",
    "Mapping",
    "Menu",
    "Model",
    "MuSpec",
    "NaiveNotWorse",
    "NestingViolation",
    "NonFinite",
    "OptConfig",
    "Pchm",
    "ProblemKind",
    "RejectionBudgetExceeded",
    "RestrictReport",
    "RestrictlabError",
    "RunConfig",
    "SweepResult",
    "TableModel",
    "ThreeOutcomeLottery",
    "ZeroLikelihood",
    "alt_fstar_discrepancy",
    "build_fosd_order",
    "builtin_menu",
    "check_decomposition",
    "classify_dominance",
    "data_folds",
    "delta_histogram",
    "discrepancy",
    "dump_mapping_samples",
    "empirical_error",
    "estimate_completeness",
    "estimate_restrictiveness",
    "expected_delta",
    "expected_error",
    "expected_value",
    "f_discrepancy",
    "fit_model_to_data",
    "fit_model_to_mapping",
    "fit_unrestricted",
    "fold_assignment",
    "fstar_quantile",
    "group_completeness",
    "kappa_from_cv",
    "kfold_cv",
    "load_ce_dataset",
    "load_game_dataset",
    "make_random_games",
    "menu_checksum",
    "naive_mapping",
    "normal_quantile",
    "obs_losses",
    "optimal_mapping",
    "order_violations",
    "parse_model",
    "play_violations",
    "read_mapping_samples",
    "render_report",
    "run_cli",
    "sample_ce_mapping",
    "sample_mapping",
    "sample_play_mapping",
    "sensitivity_sweep",
    "substream",
    "summarize_deltas",
    "synthetic_gain_menu",
    "total_variation",
    "uniform_play",
    "validate_mapping",
    "weighting",
]
