# smotecls/services/experiment.py
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from smotecls.core.config import ABLATIONS, STRATEGIES, Settings
from smotecls.core.errors import ConfigError
from smotecls.core.rng import RngStream
from smotecls.models.dataset import MINOR, LabeledDataset
from smotecls.models.tree import ForestModel, TreeSpec, fit_forest, proba_over
from smotecls.services.metrics import METRIC_NAMES, ScoredPredictions, evaluate
from smotecls.services.pipeline import oversample
from smotecls.services.preprocess import split_indices
from smotecls.services.simgen import evaluate_filter

logger = logging.getLogger("smotecls.experiment")

# Stable per-strategy stream codes, independent of which strategies a run asks for.
STRATEGY_CODES: Dict[str, int] = {
    name: i for i, name in enumerate(STRATEGIES + tuple(a for a in ABLATIONS if a not in STRATEGIES))
}
_SPLIT_TAG = 0
_AUGMENT_BASE = 100
_EVAL_BASE = 200


@dataclass(eq=False)
class RepeatOutcome:
    strategy: str
    repeat: int
    metrics: Optional[Dict[str, float]] = None
    error: Optional[str] = None
    filter_stats: Optional[Dict[str, float]] = None
    counts: Dict[str, int] = field(default_factory=dict)


@dataclass(eq=False)
class MetricsReport:
    """Per-repeat metrics of one strategy on one dataset, plus failures."""

    dataset: str
    strategy: str
    per_repeat: List[Dict[str, float]] = field(default_factory=list)
    failures: List[Tuple[int, str]] = field(default_factory=list)
    filter_stats: List[Dict[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def values(self, metric: str) -> np.ndarray:
        return np.array([r[metric] for r in self.per_repeat], dtype=np.float64)

    def mean(self, metric: str) -> float:
        v = self.values(metric)
        return float(v.mean()) if len(v) else float("nan")

    def stderr(self, metric: str) -> float:
        v = self.values(metric)
        if len(v) == 0:
            return float("nan")
        if len(v) == 1:
            return 0.0
        return float(v.std(ddof=1) / math.sqrt(len(v)))

    def filter_mean(self, key: str) -> float:
        vals = [s[key] for s in self.filter_stats if not math.isnan(s.get(key, float("nan")))]
        return float(np.mean(vals)) if vals else float("nan")


def fit_eval_classifier(train: LabeledDataset, settings: Settings, rng: RngStream) -> ForestModel:
    if settings.classifier == "tree":
        return fit_forest(train.features, train.labels, n_trees=1, spec=TreeSpec(), rng=rng, bootstrap=False)
    return fit_forest(train.features, train.labels, n_trees=settings.eval_trees, rng=rng)


def score(model: ForestModel, test: LabeledDataset) -> ScoredPredictions:
    p = proba_over(model, test.features, 2)
    return ScoredPredictions(scores=p[:, MINOR], labels=test.labels)


def _run_repeat(
    data: LabeledDataset,
    strategies: Sequence[str],
    settings: Settings,
    repeat: int,
    provenance: Optional[Sequence[str]],
) -> List[RepeatOutcome]:
    stream = RngStream(settings.seed, repeat)
    train_idx, test_idx = split_indices(data.labels, settings.test_fraction, stream.spawn(_SPLIT_TAG))
    train, test = data.subset(train_idx), data.subset(test_idx)
    prov_train = None if provenance is None else [provenance[i] for i in train_idx]

    out: List[RepeatOutcome] = []
    for name in strategies:
        code = STRATEGY_CODES[name]
        try:
            res = oversample(train, name, settings, stream.spawn(_AUGMENT_BASE + code))
            model = fit_eval_classifier(res.augmented, settings, stream.spawn(_EVAL_BASE + code))
            metrics = evaluate(score(model, test))
            stats = None
            if prov_train is not None and res.report is not None:
                stats = evaluate_filter(res.report, prov_train)
            out.append(RepeatOutcome(name, repeat, metrics, None, stats, res.counts))
            logger.info("BENCH repeat=%d strategy=%s auprc=%.4f auc=%.4f", repeat, name, metrics["auprc"], metrics["auc"])
        except Exception as e:
            logger.exception("BENCH repeat=%d strategy=%s failed: %s", repeat, name, e)
            out.append(RepeatOutcome(name, repeat, error=f"{type(e).__name__}: {e}"))
    return out


def run_experiment(
    data: LabeledDataset,
    strategies: Sequence[str],
    settings: Settings,
    dataset_name: str = "data",
    provenance: Optional[Sequence[str]] = None,
) -> List[MetricsReport]:
    """
    Repeated split -> augment -> fit -> score protocol. Repeat r draws from
    stream r; BASE is always evaluated and listed first. Failures are kept
    per (strategy, repeat) rather than dropped.
    """
    unknown = [s for s in strategies if s not in STRATEGY_CODES]
    if unknown:
        raise ConfigError(f"unknown strategies: {', '.join(unknown)}")
    names = ["base"] + [s for s in dict.fromkeys(strategies) if s != "base"]
    repeats = range(settings.repeats)

    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            per_repeat = list(pool.map(lambda r: _run_repeat(data, names, settings, r, provenance), repeats))
    else:
        per_repeat = [_run_repeat(data, names, settings, r, provenance) for r in repeats]

    reports = {n: MetricsReport(dataset_name, n) for n in names}
    for outcomes in per_repeat:
        for o in outcomes:
            rep = reports[o.strategy]
            if o.error is not None:
                rep.failures.append((o.repeat, o.error))
                continue
            rep.per_repeat.append(o.metrics)
            if o.filter_stats is not None:
                rep.filter_stats.append(o.filter_stats)
    return [reports[n] for n in names]


def ranks(reports: Sequence[MetricsReport], metric: str) -> Dict[str, float]:
    """Rank 1 = best mean; BASE and strategies with no successful repeat are unranked."""
    ranked = [r for r in reports if r.strategy != "base" and r.per_repeat]
    if not ranked:
        return {}
    r = rankdata([-rep.mean(metric) for rep in ranked], method="min")
    return {rep.strategy: float(v) for rep, v in zip(ranked, r)}


def report_frame(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    """Machine-readable table: one row per (dataset, strategy)."""
    rows = []
    rank_of = {m: ranks(reports, m) for m in METRIC_NAMES}
    for rep in reports:
        row: Dict[str, object] = {
            "dataset": rep.dataset,
            "strategy": rep.strategy,
            "repeats_ok": len(rep.per_repeat),
            "repeats_failed": len(rep.failures),
        }
        for m in METRIC_NAMES:
            row[f"{m}_mean"] = rep.mean(m)
            row[f"{m}_stderr"] = rep.stderr(m)
            row[f"{m}_rank"] = rank_of[m].get(rep.strategy, np.nan)
        if rep.filter_stats:
            row["noise_exclusion"] = rep.filter_mean("noise_exclusion")
            row["G1_retention"] = rep.filter_mean("G1_retention")
            row["G2_retention"] = rep.filter_mean("G2_retention")
        row["errors"] = "; ".join(f"r{r}: {msg}" for r, msg in rep.failures)
        rows.append(row)
    return pd.DataFrame(rows)


def _cell(mean: float, se: float, rank: float) -> str:
    if math.isnan(mean):
        return "FAILED"
    text = f"{mean:.3f}±{se:.3f}"
    return text if math.isnan(rank) else f"{text} ({int(rank)})"


def aligned_table(frame: pd.DataFrame) -> str:
    """Plain-text table with mean±stderr (rank) cells."""
    view = pd.DataFrame({"dataset": frame["dataset"], "strategy": frame["strategy"]})
    for m in METRIC_NAMES:
        view[m.upper()] = [
            _cell(mu, se, rk) for mu, se, rk in zip(frame[f"{m}_mean"], frame[f"{m}_stderr"], frame[f"{m}_rank"])
        ]
    if "noise_exclusion" in frame.columns:
        view["noise_excl"] = frame["noise_exclusion"].map(lambda v: "" if pd.isna(v) else f"{v:.3f}")
    view["failed"] = frame["repeats_failed"]
    return view.to_string(index=False)
