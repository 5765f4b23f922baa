# smotecls/core/config.py
from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Mapping, Optional

from dotenv import dotenv_values

from smotecls.core.errors import ConfigError

logger = logging.getLogger("smotecls.config")

ENV_PREFIX = "SMOTECLS_"

STRATEGIES = (
    "base",
    "smote",
    "bsmote",
    "smote_enn",
    "kmsmote",
    "smote_cls",
    "dfbs_filter_smote",
    "ddhs_filter_smote",
    "latent_smote_decode",
    "cvae_generate",
)

ABLATIONS = ("wo_dis", "wo_seg", "wo_af", "smote_cls")

PRIOR_PRESETS = (
    "default",
    "spread",
    "axis",
    "merged",
)

# numbered preset tokens accepted on every surface
PRIOR_ALIASES = {
    "appendixA2-1": "default",
    "appendixA2-2": "spread",
    "appendixA2-3": "axis",
    "appendixA2-4": "merged",
}

PRIOR_PRESET_CHOICES = PRIOR_PRESETS + tuple(PRIOR_ALIASES)


def resolve_prior_preset(name: str) -> str:
    return PRIOR_ALIASES.get(name, name)


@dataclass(frozen=True)
class Settings:
    seed: int = 0
    rho: float = 1.0
    k_knn: int = 5
    k_smote: int = 5
    q_easy: float = 0.9
    q_hard: float = 0.6
    tau_easy: Optional[float] = None
    tau_hard: Optional[float] = None
    beta: float = 1.0
    epochs: int = 300
    batch: int = 64
    lr: float = 1e-3
    optimizer: str = "adam"
    loss_reduction: str = "sum"
    latent_dim: Optional[int] = None  # None -> 4 if d > 90 else 2
    f_eta: str = "forest"
    f_eta_trees: int = 200
    prior_preset: str = "default"
    prior_variance: float = 0.1
    eval_trees: int = 100
    classifier: str = "forest"
    repeats: int = 10
    test_fraction: float = 0.2
    k_enn: int = 3
    km_clusters: int = 8
    km_threshold: float = 0.5
    ddhs_fraction: float = 0.75
    naive_fraction: float = 0.6
    workers: int = 1

    def resolved_latent_dim(self, n_features: int) -> int:
        if self.latent_dim is not None:
            return int(self.latent_dim)
        return 4 if n_features > 90 else 2

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(Settings)}


def _coerce(key: str, raw: Any) -> Any:
    kind = str(_FIELD_TYPES[key])
    if raw is None:
        return None
    if isinstance(raw, str):
        s = raw.strip()
        if s == "" or s.lower() in ("none", "auto"):
            if "Optional" in kind:
                return None
            raise ConfigError(f"{key} requires a value")
        raw = s
    try:
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r}")
    return str(raw)


def read_config_file(path: str) -> Dict[str, Any]:
    """Plain key=value text (dotenv syntax). Keys may use dashes or underscores."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    out: Dict[str, Any] = {}
    for k, v in dotenv_values(path).items():
        key = k.strip().lower().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key: {k}")
        out[key] = _coerce(key, v)
    return out


def _from_env(env: Mapping[str, str]) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for key in _FIELD_TYPES:
        val = env.get(ENV_PREFIX + key.upper())
        if val is not None:
            out[key] = _coerce(key, val)
    return out


def validate(settings: Settings) -> Settings:
    if settings.rho <= 0:
        raise ConfigError("rho must be > 0")
    if settings.k_knn < 1 or settings.k_smote < 1 or settings.k_enn < 1:
        raise ConfigError("neighbor counts must be >= 1")
    for name in ("q_easy", "q_hard", "naive_fraction", "ddhs_fraction"):
        q = getattr(settings, name)
        if not (0 < q <= 1):
            raise ConfigError(f"{name} must be in (0, 1]")
    if settings.beta < 0:
        raise ConfigError("beta must be >= 0")
    if settings.epochs < 0 or settings.batch < 1:
        raise ConfigError("epochs must be >= 0 and batch >= 1")
    if settings.lr <= 0:
        raise ConfigError("lr must be > 0")
    if settings.optimizer not in ("adam", "sgd"):
        raise ConfigError("optimizer must be 'adam' or 'sgd'")
    if settings.loss_reduction not in ("sum", "mean"):
        raise ConfigError("loss_reduction must be 'sum' or 'mean'")
    if settings.f_eta not in ("forest", "mlp"):
        raise ConfigError("f_eta must be 'forest' or 'mlp'")
    if settings.classifier not in ("forest", "tree"):
        raise ConfigError("classifier must be 'forest' or 'tree'")
    if settings.prior_preset not in PRIOR_PRESET_CHOICES:
        raise ConfigError(f"prior_preset must be one of {', '.join(PRIOR_PRESET_CHOICES)}")
    if settings.latent_dim is not None and settings.latent_dim < 1:
        raise ConfigError("latent_dim must be >= 1")
    if settings.repeats < 1:
        raise ConfigError("repeats must be >= 1")
    if not (0 < settings.test_fraction < 1):
        raise ConfigError("test_fraction must be in (0, 1)")
    if settings.f_eta_trees < 1 or settings.eval_trees < 1:
        raise ConfigError("tree counts must be >= 1")
    if settings.workers < 1:
        raise ConfigError("workers must be >= 1")
    return replace(settings, prior_preset=resolve_prior_preset(settings.prior_preset))


def load_settings(
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> Settings:
    """
    Resolve settings with precedence: flags > config file > SMOTECLS_* env > defaults.

    `overrides` holds only the flags the user actually passed (None values are ignored).
    """
    merged: Dict[str, Any] = {}
    merged.update(_from_env(os.environ if env is None else env))
    if config_path:
        merged.update(read_config_file(config_path))
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k not in _FIELD_TYPES:
            raise ConfigError(f"unknown setting: {k}")
        merged[k] = _coerce(k, v) if isinstance(v, str) else v
    settings = validate(replace(Settings(), **merged))
    logger.debug("CONFIG resolved %s", settings)
    return settings
