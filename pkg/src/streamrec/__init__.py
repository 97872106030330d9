from ._version import __version__
from .core import (
    FactorMatrix,
    Hyperparameters,
    IdIndex,
    InteractionEvent,
    RankedList,
    Recommender,
    init_row,
    intern,
)
from .isgd import IsgdModel
from .bagging import BaggedModel, ConstantSampler, PoissonSampler, poisson1_draw
from .prequential import (
    EvalConfig,
    PrequentialEvaluator,
    SeenSets,
    StepRecord,
    moving_average,
    run,
    score_step,
    summarize,
    warm_up,
)
from .ingest import DatasetSpec, parse_event_line, read_events, split_warmup, threshold_filter
from .exceptions import (
    StreamRecError,
    ConfigError,
    ParseError,
    DataError,
    UnknownUserError,
    ModelDivergenceError,
    EvaluationAborted,
)
from .types import StepStatus, SummaryRow

__all__ = [
    "__version__",
    # Domain types
    "InteractionEvent",
    "IdIndex",
    "FactorMatrix",
    "Hyperparameters",
    "RankedList",
    "Recommender",
    "intern",
    "init_row",
    # Models
    "IsgdModel",
    "BaggedModel",
    "PoissonSampler",
    "ConstantSampler",
    "poisson1_draw",
    # Evaluation
    "EvalConfig",
    "PrequentialEvaluator",
    "SeenSets",
    "StepRecord",
    "run",
    "score_step",
    "summarize",
    "moving_average",
    "warm_up",
    # Input
    "DatasetSpec",
    "parse_event_line",
    "read_events",
    "threshold_filter",
    "split_warmup",
    # Types / Exceptions
    "StepStatus",
    "SummaryRow",
    "StreamRecError",
    "ConfigError",
    "ParseError",
    "DataError",
    "UnknownUserError",
    "ModelDivergenceError",
    "EvaluationAborted",
]
