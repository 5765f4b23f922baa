# smotecls/services/plots.py
from __future__ import annotations

import logging
import os
from typing import List

import numpy as np
import pandas as pd

from smotecls.models.dataset import PSEUDO_NAMES

logger = logging.getLogger("smotecls.plots")

COLORS = {"M": "#4c72b0", "M*": "#8fa8d6", "m": "#c44e52", "m*": "#f0a35e"}
WIDTH, HEIGHT, PAD = 640, 520, 48


def _scale(v: np.ndarray, lo: float, hi: float, a: float, b: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return a + (v - lo) / span * (b - a)


def latent_svg(latent: pd.DataFrame, title: str = "latent space") -> str:
    """
    Scatter of the first two latent coordinates colored by pseudo label.
    Kept minors are filled circles, filtered minors are crosses, majors are
    small hollow circles.
    """
    x = latent["z_1"].to_numpy(dtype=np.float64)
    y = latent["z_2"].to_numpy(dtype=np.float64) if "z_2" in latent.columns else np.zeros(len(latent))
    xs = _scale(x, x.min(), x.max(), PAD, WIDTH - PAD)
    ys = _scale(y, y.min(), y.max(), HEIGHT - PAD, PAD)

    out: List[str] = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="#333"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="#333"/>',
        f'<text x="{PAD}" y="{HEIGHT - PAD + 16}" font-size="10">{x.min():.2f}</text>',
        f'<text x="{WIDTH - PAD - 24}" y="{HEIGHT - PAD + 16}" font-size="10">{x.max():.2f}</text>',
        f'<text x="4" y="{HEIGHT - PAD}" font-size="10">{y.min():.2f}</text>',
        f'<text x="4" y="{PAD + 4}" font-size="10">{y.max():.2f}</text>',
    ]
    kept = latent["kept"].tolist() if "kept" in latent.columns else [None] * len(latent)
    for px, py, label, k in zip(xs, ys, latent["pseudo"], kept):
        color = COLORS.get(label, "#777")
        if label in ("M", "M*") or k is None or pd.isna(k):
            out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2" fill="none" stroke="{color}"/>')
        elif int(k):
            out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3.5" fill="{color}"/>')
        else:
            d = 3.5
            out.append(
                f'<path d="M{px - d:.2f},{py - d:.2f} L{px + d:.2f},{py + d:.2f} '
                f'M{px - d:.2f},{py + d:.2f} L{px + d:.2f},{py - d:.2f}" stroke="{color}" stroke-width="1.5"/>'
            )
    # legend
    for i, name in enumerate(PSEUDO_NAMES):
        ly = PAD + 14 * i
        out.append(f'<circle cx="{WIDTH - PAD - 40}" cy="{ly}" r="4" fill="{COLORS[name]}"/>')
        out.append(f'<text x="{WIDTH - PAD - 30}" y="{ly + 4}" font-size="11">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(svg: str, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    logger.info("EXPORT svg %s", path)
