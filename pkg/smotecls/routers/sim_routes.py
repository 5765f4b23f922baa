# smotecls/routers/sim_routes.py
from __future__ import annotations

import logging

from fastapi import APIRouter, HTTPException

from smotecls.models.dataset import MINOR
from smotecls.models.types import SimulateRequest, SimulateResponse
from smotecls.services.simgen import SimSpec, generate

logger = logging.getLogger("smotecls.sim")
router = APIRouter(tags=["Simulation"])


# -----------------------------
# POST /api/simulate
# -----------------------------
@router.post("/simulate", response_model=SimulateResponse)
def simulate(body: SimulateRequest):
    """
    Two-cluster minority benchmark with label-swap noise; rows carry their
    ground-truth provenance tag.
    """
    params = dict(body)
    seed = int(params.pop("seed", 0))
    try:
        spec = SimSpec(**params)
        data, provenance = generate(spec, seed)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    rows = [
        {
            "x1": float(x[0]),
            "x2": float(x[1]),
            "label": "m" if y == MINOR else "M",
            "provenance": tag,
        }
        for x, y, tag in zip(data.features, data.labels, provenance)
    ]
    counts = {tag: provenance.count(tag) for tag in ("G1", "G2", "noise", "major")}
    logger.info("SIM API seed=%d rows=%d", seed, len(rows))
    return {"rows": rows, "counts": counts}
