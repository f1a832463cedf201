"""flipbench: randomness / human-bias test battery for binary coin-flip
sequences collected from text-generation endpoints or synthetic sources."""

__version__ = "0.1.0"

from .sequences import (  # noqa: F401
    FlipSequence,
    ParseKind,
    ParseOutcome,
    SequenceMeta,
    Window,
    decode,
    encode,
    extract_windows,
    parse_response,
    windows,
)
from .generators import GeneratorSpec, generate  # noqa: F401
from .baselines import (  # noqa: F401
    BaselineTable,
    HumanBaselineRegistry,
    exact_baseline,
    load_human_baselines,
    monte_carlo_baseline,
)
from .predictor import (  # noqa: F401
    CVConfig,
    CVResult,
    LassoModel,
    cross_validated_mse,
    extract_features,
    fit_lasso,
    gap_ratio,
    soft_threshold,
)
from .collector import (  # noqa: F401
    CollectionRecord,
    EndpointConfig,
    PromptSpec,
    SweepPlan,
    default_plan,
    read_records,
    run_sweep,
    write_records,
)
from .config import ReportOptions, Thresholds, load_config  # noqa: F401
from .report import build_report, emit  # noqa: F401
