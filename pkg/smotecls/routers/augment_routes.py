# smotecls/routers/augment_routes.py
from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from fastapi import APIRouter, HTTPException

from smotecls.core.config import load_settings
from smotecls.core.rng import RngStream
from smotecls.models.dataset import MINOR, LabeledDataset
from smotecls.models.types import AugmentRequest, AugmentResponse, FilterSummary
from smotecls.services.pipeline import oversample
from smotecls.services.preprocess import standardize
from smotecls.services.sampler import FilterReport

logger = logging.getLogger("smotecls.augment")
router = APIRouter(tags=["Augment"])


def _filter_summary(report: Optional[FilterReport]) -> Optional[FilterSummary]:
    if report is None:
        return None
    # JSON has no infinities; an unfiltered group reports a null threshold
    thresholds = {k: (v if math.isfinite(v) else None) for k, v in report.thresholds.items()}
    return {"thresholds": thresholds, "groups": report.counts()}


@router.post("/augment", response_model=AugmentResponse)
def augment(body: AugmentRequest):
    """
    Oversample the posted rows with one strategy. Rows are standardized
    first unless `standardize` is false; returned rows are in input units.
    """
    if "rows" not in body or "labels" not in body:
        raise HTTPException(400, "rows and labels are required")
    positive = body.get("positive_label", "m")
    strategy = body.get("strategy", "smote_cls")
    tokens = tuple(str(t) for t in body["labels"])

    try:
        settings = load_settings(overrides=body.get("options") or {})
        labels = np.array([MINOR if t == positive else 0 for t in tokens], dtype=np.int8)
        negatives = sorted({t for t in tokens if t != positive}) or ["M"]
        data = LabeledDataset(
            features=body["rows"],
            labels=labels,
            tokens=tokens,
            positive_token=positive,
            negative_token=negatives[0],
        )
        scaler = None
        if body.get("standardize", True):
            data, scaler = standardize(data)
        res = oversample(data, strategy, settings, RngStream(settings.seed))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    out = res.augmented
    x = out.features if scaler is None else scaler.inverse_transform(out.features)
    logger.info("AUGMENT API strategy=%s rows=%d synthetic=%d", strategy, out.n_rows, res.n_synthetic)
    return {
        "strategy": strategy,
        "rows": x.tolist(),
        "labels": [out.token_of(i) for i in range(out.n_rows)],
        "synthetic": res.synthetic.tolist(),
        "counts": res.counts,
        "filter": _filter_summary(res.report),
    }
