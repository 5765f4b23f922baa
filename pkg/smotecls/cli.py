# smotecls/cli.py
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from smotecls import __version__
from smotecls.core import db
from smotecls.core.checkpoint import save_model
from smotecls.core.config import ABLATIONS, PRIOR_PRESET_CHOICES, STRATEGIES, Settings, load_settings
from smotecls.core.errors import ConfigError, DataError, SmoteClsError
from smotecls.core.persist import ensure_schema, record_metrics, record_run
from smotecls.core.rng import RngStream
from smotecls.services.experiment import aligned_table, report_frame, run_experiment
from smotecls.services.ingest import (
    dataset_frame,
    file_digest,
    load_delimited,
    read_column,
    write_delimited,
    write_frame,
)
from smotecls.services.manifest import RunManifest, check_inputs, manifest_path, read_manifest, write_manifest
from smotecls.services.metrics import METRIC_NAMES
from smotecls.services.pipeline import (
    SmoteClsConfig,
    fit_latent_model,
    latent_frame,
    oversample,
)
from smotecls.services.plots import latent_svg, write_svg
from smotecls.services.preprocess import standardize
from smotecls.services.sampler import group_adaptive_filter
from smotecls.services.simgen import PROVENANCE_COLUMN, SimSpec, evaluate_filter, generate

logger = logging.getLogger("smotecls.cli")

EXIT_OK, EXIT_PARTIAL, EXIT_ERROR = 0, 1, 2
ORIGIN_COLUMN = "origin"

ALL_STRATEGIES = STRATEGIES + tuple(a for a in ABLATIONS if a not in STRATEGIES)

# each flag lands on the Settings field of the same name
_SETTING_FLAGS = (
    ("--seed", int),
    ("--rho", float),
    ("--k-knn", int),
    ("--k-smote", int),
    ("--q-easy", float),
    ("--q-hard", float),
    ("--tau-easy", float),
    ("--tau-hard", float),
    ("--beta", float),
    ("--epochs", int),
    ("--batch", int),
    ("--lr", float),
    ("--optimizer", str),
    ("--loss-reduction", str),
    ("--latent-dim", str),  # integer or "auto"; parsed with the other settings
    ("--f-eta", str),
    ("--f-eta-trees", int),
    ("--prior-preset", str),
    ("--prior-variance", float),
    ("--eval-trees", int),
    ("--classifier", str),
    ("--repeats", int),
    ("--test-fraction", float),
    ("--k-enn", int),
    ("--km-clusters", int),
    ("--km-threshold", float),
    ("--ddhs-fraction", float),
    ("--naive-fraction", float),
    ("--workers", int),
)
_CHOICES = {
    "--optimizer": ("adam", "sgd"),
    "--loss-reduction": ("sum", "mean"),
    "--f-eta": ("forest", "mlp"),
    "--classifier": ("forest", "tree"),
    "--prior-preset": PRIOR_PRESET_CHOICES,
}


def _add_settings_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("settings (default: config file, SMOTECLS_* env, built-in)")
    g.add_argument("--config", default=None, help="key=value settings file")
    for flag, kind in _SETTING_FLAGS:
        g.add_argument(flag, type=kind, default=None, choices=_CHOICES.get(flag))


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--label-column", default="label")
    p.add_argument("--positive-label", default="m", help="label token of the minority class")
    p.add_argument("--no-standardize", action="store_true", help="use features as read")


def _settings_from(args: argparse.Namespace) -> Settings:
    overrides = {flag[2:].replace("-", "_"): getattr(args, flag[2:].replace("-", "_")) for flag, _ in _SETTING_FLAGS}
    return load_settings(config_path=args.config, overrides=overrides)


def _strategy(token: str) -> str:
    if token not in ALL_STRATEGIES:
        raise argparse.ArgumentTypeError(f"unknown strategy {token!r}; valid: {', '.join(ALL_STRATEGIES)}")
    return token


def _strategy_list(text: str) -> List[str]:
    return [_strategy(t.strip()) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smotecls", description="SMOTE-CLS oversampling toolkit")
    parser.add_argument("--version", action="version", version=f"smotecls {__version__}")
    parser.add_argument("--log-level", default=os.getenv("SMOTECLS_LOG_LEVEL", "INFO"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write the two-cluster benchmark with label-swap noise")
    p.add_argument("--n-g1", type=int, default=80)
    p.add_argument("--n-g2", type=int, default=20)
    p.add_argument("--n-major", type=int, default=1500)
    p.add_argument("--n-noise", type=int, default=50)
    p.add_argument("--noise-mode", choices=("remove", "fresh"), default="remove")
    p.add_argument("--out", required=True)
    _add_settings_flags(p)

    p = sub.add_parser("augment", help="oversample one dataset with one strategy")
    p.add_argument("input")
    p.add_argument("--strategy", type=_strategy, default="smote_cls")
    p.add_argument("--out", required=True)
    p.add_argument("--latent-out", default=None, help="latent export (default: <out>.latent.csv)")
    p.add_argument("--svg-out", default=None, help="latent scatter (default: <out>.latent.svg)")
    p.add_argument("--report-out", default=None, help="filter report (default: <out>.filter.csv)")
    p.add_argument("--save-model", default=None, help="write the trained model checkpoint here")
    _add_input_flags(p)
    _add_settings_flags(p)

    p = sub.add_parser("benchmark", help="repeated split/augment/evaluate over datasets")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--strategies", type=_strategy_list, default=["base", "smote", "smote_cls"])
    p.add_argument("--out", required=True, help="metrics table (.csv or .tsv)")
    _add_input_flags(p)
    _add_settings_flags(p)

    p = sub.add_parser("ablate", help="the four ablation configurations through the benchmark")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    _add_input_flags(p)
    _add_settings_flags(p)

    p = sub.add_parser("export-latent", help="latent embedding, densities and kept flags (no oversampling)")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--svg-out", default=None)
    _add_input_flags(p)
    _add_settings_flags(p)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


# -----------------------------
# helpers
# -----------------------------
def _sidecar(out: str, suffix: str) -> str:
    root, _ = os.path.splitext(out)
    return root + suffix


def _load(args: argparse.Namespace, path: str):
    data = load_delimited(path, args.label_column, args.positive_label, exclude=(PROVENANCE_COLUMN, ORIGIN_COLUMN))
    provenance = read_column(path, PROVENANCE_COLUMN)
    scaler = None
    if not args.no_standardize:
        data, scaler = standardize(data)
    return data, scaler, provenance


def _finish(manifest: RunManifest, out: str, frame_rows: Optional[List[Dict[str, Any]]] = None) -> None:
    manifest.finish()
    write_manifest(manifest, manifest_path(out))
    if db.init_engine() is None:
        return
    ensure_schema()
    record_run(manifest.to_dict())
    if frame_rows:
        record_metrics(manifest.run_id, frame_rows, METRIC_NAMES)


def _manifest(args: argparse.Namespace, argv: Sequence[str], settings: Settings, inputs: Sequence[str]) -> RunManifest:
    m = RunManifest(
        command=args.command,
        argv=list(argv),
        settings=settings.to_dict(),
        seed=settings.seed,
        inputs={p: file_digest(p) for p in inputs},
    )
    if hasattr(args, "no_standardize"):
        m.notes["standardized"] = not args.no_standardize
    return m


def _print_filter_stats(stats: Dict[str, float]) -> None:
    parts = [f"{k}={v:.3f}" if not math.isnan(v) else f"{k}=n/a" for k, v in stats.items()]
    print("filter evaluation: " + " ".join(parts))


# -----------------------------
# commands
# -----------------------------
def cmd_simulate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    settings = _settings_from(args)
    spec = SimSpec(
        n_g1=args.n_g1,
        n_g2=args.n_g2,
        n_major=args.n_major,
        n_noise=args.n_noise,
        noise_mode=args.noise_mode,
    )
    manifest = _manifest(args, argv, settings, [])
    data, provenance = generate(spec, RngStream(settings.seed))
    write_delimited(data, args.out, extra={PROVENANCE_COLUMN: provenance})
    manifest.outputs.append(args.out)
    manifest.notes["spec"] = spec.to_dict()
    _finish(manifest, args.out)
    print(f"wrote {data.n_rows} rows ({data.n_minor} minor, {data.n_major} major) to {args.out}")
    return EXIT_OK


def cmd_augment(args: argparse.Namespace, argv: Sequence[str]) -> int:
    settings = _settings_from(args)
    manifest = _manifest(args, argv, settings, [args.input])
    data, scaler, provenance = _load(args, args.input)
    res = oversample(data, args.strategy, settings, RngStream(settings.seed))

    origin = ["synthetic" if s else "original" for s in res.synthetic]
    write_delimited(res.augmented, args.out, label_column=args.label_column, standardizer=scaler, extra={ORIGIN_COLUMN: origin})
    manifest.outputs.append(args.out)

    if res.latent is not None:
        latent_out = args.latent_out or _sidecar(args.out, ".latent.csv")
        svg_out = args.svg_out or _sidecar(args.out, ".latent.svg")
        write_frame(res.latent, latent_out)
        write_svg(latent_svg(res.latent, title=f"{args.strategy} latent space"), svg_out)
        manifest.outputs.extend([latent_out, svg_out])
    if res.report is not None:
        report_out = args.report_out or _sidecar(args.out, ".filter.csv")
        rep = res.report
        frame = dataset_frame(
            data.subset(rep.rows),
            label_column=args.label_column,
            standardizer=scaler,
            extra={"row": rep.rows + 1, "group": rep.groups, "density": rep.density, "kept": rep.kept.astype(int)},
        )
        write_frame(frame, report_out)
        manifest.outputs.append(report_out)
        for group, c in rep.counts().items():
            print(f"filter group {group}: kept {c['kept']}/{c['total']}")
        if provenance is not None:
            stats = evaluate_filter(rep, provenance)
            manifest.notes["filter_evaluation"] = stats
            _print_filter_stats(stats)
    if args.save_model:
        if res.model is None:
            raise ConfigError(f"strategy {args.strategy!r} trains no model to save")
        save_model(res.model, args.save_model, kind="cvae")
        manifest.outputs.append(args.save_model)

    manifest.notes["counts"] = res.counts
    _finish(manifest, args.out)
    print(
        f"{args.strategy}: {res.n_synthetic} synthetic rows; "
        f"minor={res.augmented.n_minor} major={res.augmented.n_major} -> {args.out}"
    )
    return EXIT_OK


def _run_tables(args, argv, settings: Settings, inputs: Sequence[str], strategies: Sequence[str]) -> int:
    manifest = _manifest(args, argv, settings, inputs)
    frames, failed = [], 0
    for path in inputs:
        data, _, provenance = _load(args, path)
        name = os.path.splitext(os.path.basename(path))[0]
        reports = run_experiment(data, strategies, settings, dataset_name=name, provenance=provenance)
        frame = report_frame(reports)
        failed += int(frame["repeats_failed"].sum())
        frames.append(frame)
        print(f"\n== {name} ==")
        print(aligned_table(frame))

    table = pd.concat(frames, ignore_index=True)
    write_frame(table, args.out)
    text_out = _sidecar(args.out, ".txt")
    with open(text_out, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(f"== {frame['dataset'].iloc[0]} ==\n{aligned_table(frame)}\n\n")
    manifest.outputs.extend([args.out, text_out])
    manifest.notes["failed_cells"] = failed
    _finish(manifest, args.out, table.to_dict("records"))
    if failed:
        logger.warning("BENCH %d failed (strategy, repeat) cells", failed)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace, argv: Sequence[str]) -> int:
    return _run_tables(args, argv, _settings_from(args), args.inputs, args.strategies)


def cmd_ablate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    return _run_tables(args, argv, _settings_from(args), [args.input], list(ABLATIONS))


def cmd_export_latent(args: argparse.Namespace, argv: Sequence[str]) -> int:
    settings = _settings_from(args)
    manifest = _manifest(args, argv, settings, [args.input])
    data, _, provenance = _load(args, args.input)
    config = SmoteClsConfig.from_settings(settings)
    fit = fit_latent_model(data, config, RngStream(settings.seed))
    minor = data.minor_idx
    report = group_adaptive_filter(fit.z[minor], fit.pseudo.pseudo_labels[minor], config.filter, rows=minor)
    latent = latent_frame(data, fit, report)
    if provenance is not None:
        latent[PROVENANCE_COLUMN] = provenance
    write_frame(latent, args.out)
    svg_out = args.svg_out or _sidecar(args.out, ".svg")
    write_svg(latent_svg(latent), svg_out)
    manifest.outputs.extend([args.out, svg_out])
    manifest.notes["thresholds"] = {k: (v if math.isfinite(v) else None) for k, v in report.thresholds.items()}
    _finish(manifest, args.out)
    print(f"latent export: {data.n_rows} rows, h={fit.z.shape[1]} -> {args.out}")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace, argv: Sequence[str]) -> int:
    manifest = read_manifest(args.manifest)
    changed = check_inputs(manifest, file_digest)
    if changed is not None:
        raise DataError(f"input changed since the recorded run: {changed}")
    if manifest.version != __version__:
        logger.warning("REPLAY manifest written by %s, running %s", manifest.version, __version__)
    logger.info("REPLAY %s %s", manifest.command, " ".join(manifest.argv))
    return main(manifest.argv)


def cmd_serve(args: argparse.Namespace, argv: Sequence[str]) -> int:
    import uvicorn

    env_file = ".env" if os.path.exists(".env") else None
    uvicorn.run("smotecls.main:app", host=args.host, port=args.port, env_file=env_file)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "augment": cmd_augment,
    "benchmark": cmd_benchmark,
    "ablate": cmd_ablate,
    "export-latent": cmd_export_latent,
    "replay": cmd_replay,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_ERROR
    logging.basicConfig(level=str(args.log_level).upper())
    try:
        return COMMANDS[args.command](args, argv)
    except SmoteClsError as e:
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception:
        logger.exception("command %s crashed", args.command)
        return EXIT_ERROR
