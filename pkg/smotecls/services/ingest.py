# smotecls/services/ingest.py
from __future__ import annotations

import hashlib
import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from smotecls.core.errors import DataError
from smotecls.models.dataset import MINOR, LabeledDataset, Standardizer

logger = logging.getLogger("smotecls.ingest")

FLOAT_FORMAT = "%.12g"


def detect_separator(header_line: str) -> str:
    """Tab if the header has a tab, else comma."""
    return "\t" if "\t" in header_line else ","


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_delimited(
    path: str,
    label_column: str,
    positive_label: str,
    exclude: Sequence[str] = (),
) -> LabeledDataset:
    """
    Read a comma- or tab-delimited file with one header row.

    Rows whose label equals `positive_label` become minor (m); every other
    token becomes major (M). Feature column order is preserved; columns named
    in `exclude` (e.g. a provenance column) are ignored.
    """
    if not os.path.exists(path):
        raise DataError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
    if not header.strip():
        raise DataError(f"empty file: {path}")

    sep = detect_separator(header)
    try:
        df = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"empty file: {path}")
    df.columns = [c.strip() for c in df.columns]

    if label_column not in df.columns:
        raise DataError(f"missing label column {label_column!r} (have: {', '.join(df.columns)})")
    if len(df) == 0:
        raise DataError(f"empty file: {path} has a header but no rows")

    tokens = tuple(t.strip() for t in df[label_column].tolist())
    feature_cols = [c for c in df.columns if c != label_column and c not in exclude]
    if not feature_cols:
        raise DataError("no feature columns")

    values = np.empty((len(df), len(feature_cols)), dtype=np.float64)
    for j, col in enumerate(feature_cols):
        parsed = pd.to_numeric(df[col].str.strip(), errors="coerce")
        bad = parsed.isna() | ~np.isfinite(parsed.to_numpy(dtype=np.float64, na_value=np.nan))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise DataError(
                f"non-numeric feature cell at row {row + 1}, column {col!r}: {df[col].iloc[row]!r}"
            )
        values[:, j] = parsed.to_numpy(dtype=np.float64)

    labels = np.array([MINOR if t == positive_label else 0 for t in tokens], dtype=np.int8)
    if labels.sum() == 0 or labels.sum() == len(labels):
        raise DataError(
            f"single-class dataset: {int(labels.sum())} rows match positive label "
            f"{positive_label!r} out of {len(labels)}"
        )
    negatives = sorted({t for t in tokens if t != positive_label})
    data = LabeledDataset(
        features=values,
        labels=labels,
        feature_names=tuple(feature_cols),
        tokens=tokens,
        positive_token=positive_label,
        negative_token=negatives[0],
    )
    logger.info(
        "INGEST %s -> rows=%d cols=%d minor=%d IR=%.4f",
        path,
        data.n_rows,
        data.n_cols,
        data.n_minor,
        data.imbalance_ratio,
    )
    return data


def dataset_frame(
    data: LabeledDataset,
    label_column: str = "label",
    standardizer: Optional[Standardizer] = None,
    extra: Optional[Dict[str, Sequence]] = None,
) -> pd.DataFrame:
    """Rows as a DataFrame, optionally mapped back to raw units, labels as tokens."""
    x = data.features if standardizer is None else standardizer.inverse_transform(data.features)
    df = pd.DataFrame(x, columns=list(data.feature_names))
    df[label_column] = [data.token_of(i) for i in range(data.n_rows)]
    for name, col in (extra or {}).items():
        df[name] = list(col)
    return df


def write_frame(df: pd.DataFrame, path: str) -> None:
    sep = "\t" if path.endswith((".tsv", ".tab")) else ","
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    df.to_csv(path, sep=sep, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")


def write_delimited(
    data: LabeledDataset,
    path: str,
    label_column: str = "label",
    standardizer: Optional[Standardizer] = None,
    extra: Optional[Dict[str, Sequence]] = None,
) -> None:
    write_frame(dataset_frame(data, label_column, standardizer, extra), path)
    logger.info("EXPORT %s rows=%d", path, data.n_rows)


def read_column(path: str, column: str) -> Optional[List[str]]:
    """One column as raw strings, or None when the file does not have it."""
    with open(path, "r", encoding="utf-8") as fh:
        sep = detect_separator(fh.readline())
    df = pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, skipinitialspace=True)
    df.columns = [c.strip() for c in df.columns]
    if column not in df.columns:
        return None
    return [t.strip() for t in df[column].tolist()]
