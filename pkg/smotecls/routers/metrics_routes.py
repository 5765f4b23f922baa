# smotecls/routers/metrics_routes.py
from __future__ import annotations

from fastapi import APIRouter, HTTPException

from smotecls.models.types import MetricsRequest, MetricsResponse
from smotecls.services.metrics import DEFAULT_THRESHOLD, ScoredPredictions, confusion_at, evaluate

router = APIRouter(tags=["Metrics"])


@router.post("/metrics", response_model=MetricsResponse)
def metrics(body: MetricsRequest):
    """AUPRC, AUC, F1 and G-mean of minor-class scores (label 1 = minor)."""
    if "scores" not in body or "labels" not in body:
        raise HTTPException(400, "scores and labels are required")
    threshold = float(body.get("threshold", DEFAULT_THRESHOLD))
    try:
        preds = ScoredPredictions(scores=body["scores"], labels=body["labels"])
        out = evaluate(preds, threshold)
        c = confusion_at(preds, threshold)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return {**out, "confusion": c._asdict()}
