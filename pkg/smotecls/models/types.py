# smotecls/models/types.py
from typing import Any, Dict, List, Optional

from typing_extensions import Literal, TypedDict


class SimulateRequest(TypedDict, total=False):
    seed: int
    n_g1: int
    n_g2: int
    n_major: int
    n_noise: int
    noise_mode: Literal["remove", "fresh"]


class SimRow(TypedDict):
    x1: float
    x2: float
    label: str
    provenance: str


class SimulateResponse(TypedDict):
    rows: List[SimRow]
    counts: Dict[str, int]


class AugmentRequest(TypedDict, total=False):
    rows: List[List[float]]
    labels: List[str]
    positive_label: str
    strategy: str
    standardize: bool
    options: Dict[str, Any]


class FilterSummary(TypedDict):
    thresholds: Dict[str, Optional[float]]
    groups: Dict[str, Dict[str, int]]


class AugmentResponse(TypedDict):
    strategy: str
    rows: List[List[float]]
    labels: List[str]
    synthetic: List[bool]
    counts: Dict[str, int]
    filter: Optional[FilterSummary]


class MetricsRequest(TypedDict, total=False):
    scores: List[float]
    labels: List[int]
    threshold: float


class Confusion(TypedDict):
    tp: int
    fp: int
    fn: int
    tn: int


class MetricsResponse(TypedDict):
    auprc: float
    auc: float
    f1: float
    gmean: float
    confusion: Confusion
