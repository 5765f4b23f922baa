# smotecls/core/db.py
import logging
import os
from typing import Any, Iterable

from sqlalchemy import create_engine, text
from sqlalchemy.engine import Engine

logger = logging.getLogger("smotecls.db")

_engine: Engine | None = None


def _normalize_url(url: str) -> str:
    """
    Map bare postgres URLs onto the default sync driver scheme.
    Anything else (sqlite:///..., mysql+...://) passes through unchanged.
    """
    if url.startswith("postgres://"):
        url = "postgresql://" + url[len("postgres://"):]
    if url.startswith("postgresql+asyncpg://"):
        url = "postgresql://" + url[len("postgresql+asyncpg://"):]
    return url


def get_database_url() -> str | None:
    raw = os.getenv("SMOTECLS_DATABASE_URL")
    if not raw:
        logger.debug("DB SMOTECLS_DATABASE_URL not set; run store disabled.")
        return None
    return _normalize_url(raw)


def init_engine() -> Engine | None:
    global _engine
    url = get_database_url()
    if not url:
        return None
    if _engine is None:
        _engine = create_engine(url, pool_pre_ping=True, future=True)
        logger.info("DB run store enabled (%s)", _engine.url.get_backend_name())
    return _engine


def close_engine():
    global _engine
    if _engine:
        _engine.dispose()
        _engine = None


def enabled() -> bool:
    return _engine is not None


def exec_sql(sql: str, params: dict[str, Any] | None = None):
    if not _engine:
        return None
    with _engine.begin() as conn:
        return conn.execute(text(sql), params or {})


def exec_many(sql: str, rows: Iterable[dict[str, Any]]):
    if not _engine:
        return None
    payload = list(rows)
    if not payload:
        return None
    with _engine.begin() as conn:
        conn.execute(text(sql), payload)
