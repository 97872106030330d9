from typing import Dict, Literal, Optional, TypedDict

StepStatus = Literal["scored", "skipped_unknown_user", "skipped_repeat"]
Aggregation = Literal["zero", "skip"]
WarmupMode = Literal["stream", "copy"]
ModelKind = Literal["isgd", "bagged"]


class SummaryRow(TypedDict, total=False):
    """
    One row of summary.csv.
    (Recall means are None when no step was scored.)
    """
    model: str
    nodes: Optional[int]
    n_steps: int
    n_scored: int
    n_skipped_unknown_user: int
    n_skipped_repeat: int
    recall: Dict[int, Optional[float]]
    update_ms: Optional[float]
    rec_ms: Optional[float]
