"""Command-line front end: ``python -m modtraj <subcommand> [flags]``.

Every analysis subcommand recomputes its upstream stages from the raw
inputs, writes its own CSV/JSON files into ``--out`` and a ``manifest.json``
with the config echo, input digests, library versions and artifact digests.
Failures print a JSON error report on stderr and exit with 2 (bad config),
3 (bad data or missing input) or 4 (anything else).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError
from .ingest import load_reason_table
from .lingcues import CueDetector, CueLexicon
from .model import DEFAULT_C_GRID, DEFAULT_EPOCHS, DEFAULT_SEED
from .trajectory import CohortConfig

EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 2, 3, 4

ANALYSIS_COMMANDS = ("ingest", "cohort", "label", "match", "features", "cues", "stats",
                     "predict", "figures", "all")


class InputMissing(DataError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"input file not found: {self.path}")


def _cohort_flags(p):
    g = p.add_argument_group("cohort")
    g.add_argument("--horizon-days", type=float, default=180.0)
    g.add_argument("--short-window-days", type=float, default=7.0)
    g.add_argument("--min-comments", type=int, default=8)
    g.add_argument("--min-tenure-days", type=float, default=30.0)
    g.add_argument("--burnin-days", type=float, default=1826.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modtraj", description="Post-block trajectory analysis toolkit."
    )
    parser.add_argument("--version", action="version", version=f"modtraj {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input-blocks", required=True, help="block log (JSON lines)")
    common.add_argument("--input-comments", required=True, help="talk-page events (JSON lines)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--strict", action="store_true", help="fail on the first bad line")
    common.add_argument("--dataset-end", type=int, default=None,
                        help="end of observation in seconds (default: latest record)")
    common.add_argument("--reason-table", default=None, help="JSON reason keyword table")
    common.add_argument("--lexicon", default=None, help="JSON cue lexicon overrides")
    common.add_argument("--tolerance", type=float, default=0.01,
                        help="date tolerance as a fraction of the block day")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--c-grid", default=",".join(repr(c) for c in DEFAULT_C_GRID))
    common.add_argument("--dev-fraction", type=float, default=0.2)
    common.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    common.add_argument("--months", type=int, default=12, help="hazard-curve months")
    _cohort_flags(common)

    helps = {
        "ingest": "parse the block log and write merged spans",
        "cohort": "apply the study filters",
        "label": "label departure and recidivism",
        "match": "build matched pairs",
        "features": "pre-block engagement features",
        "cues": "fairness cues in in-block messages",
        "stats": "cue mosaics, severity tests and Fightin' Words",
        "predict": "SVM prediction tasks (LOOCV)",
        "figures": "hazard-curve data",
        "all": "run every stage",
    }
    for name in ANALYSIS_COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])

    sp = sub.add_parser("synth", help="generate a synthetic corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n-users", type=int, default=2000)
    sp.add_argument("--apology-odds-ratio", type=float, default=0.5)
    sp.add_argument("--block-rate", type=float, default=0.5)
    sp.add_argument("--unblock-rate", type=float, default=0.15)
    sp.add_argument("--dataset-days", type=int, default=3400)
    _cohort_flags(sp)
    return parser


# ---------------------------------------------------------------------------
# config


def _parse_grid(text):
    try:
        grid = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"--c-grid: {exc}") from None
    if not grid or any(not c > 0 for c in grid):
        raise ConfigError("--c-grid needs positive values")
    return grid


def _check_threads():
    raw = os.environ.get("MODTRAJ_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"MODTRAJ_THREADS must be a positive integer, got {raw!r}")
    return n


def _prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory not writable: {out}")
    return out


def _cohort_config(args, dataset_end=None) -> CohortConfig:
    return CohortConfig(
        horizon_days=args.horizon_days,
        short_window_days=args.short_window_days,
        min_tenure_days=args.min_tenure_days,
        min_comments=args.min_comments,
        community_burnin_days=args.burnin_days,
        dataset_end=dataset_end,
    )


def validate(args) -> dict:
    """Check every flag before any work starts; returns the config echo."""
    threads = _check_threads()
    _cohort_config(args)
    echo = {
        "command": args.command,
        "horizon_days": args.horizon_days,
        "short_window_days": args.short_window_days,
        "min_comments": args.min_comments,
        "min_tenure_days": args.min_tenure_days,
        "burnin_days": args.burnin_days,
        "seed": args.seed,
        "threads": threads,
    }
    if args.command == "synth":
        echo.update(n_users=args.n_users, apology_odds_ratio=args.apology_odds_ratio,
                    block_rate=args.block_rate, unblock_rate=args.unblock_rate,
                    dataset_days=args.dataset_days)
        return echo
    if not 0 < args.dev_fraction < 1:
        raise ConfigError("--dev-fraction must lie in (0, 1)")
    if args.tolerance < 0:
        raise ConfigError("--tolerance must be non-negative")
    if args.epochs < 1:
        raise ConfigError("--epochs must be >= 1")
    if args.months < 1:
        raise ConfigError("--months must be >= 1")
    args.c_grid_values = _parse_grid(args.c_grid)
    for flag in ("input_blocks", "input_comments", "reason_table", "lexicon"):
        path = getattr(args, flag)
        if path is not None and not Path(path).is_file():
            raise InputMissing(path)
    echo.update(
        strict=args.strict,
        dataset_end=args.dataset_end,
        tolerance=args.tolerance,
        c_grid=list(args.c_grid_values),
        dev_fraction=args.dev_fraction,
        epochs=args.epochs,
        months=args.months,
        reason_table=args.reason_table,
        lexicon=args.lexicon,
    )
    return echo


# ---------------------------------------------------------------------------
# running


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict:
    import numba

    return {
        "modtraj": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "numba": numba.__version__,
    }


def _run_analysis(args, out: Path) -> dict:
    from . import pipeline as pl

    reason_table = load_reason_table(args.reason_table) if args.reason_table else None
    detector = CueDetector(CueLexicon.from_json(args.lexicon)) if args.lexicon else None
    ds = pl.load_dataset(args.input_blocks, args.input_comments, args.strict,
                         reason_table, args.dataset_end)
    cfg = _cohort_config(args, ds.dataset_end)
    cmd = args.command
    files: dict[str, str] = {}

    if cmd == "ingest":
        files["spans.csv"] = pl.spans_csv(ds)
        files["ingest_report.json"] = json.dumps({
            "block_entries": len(ds.log.entries),
            "block_lines_skipped": [[n, msg] for n, msg in ds.log.skipped],
            "comment_events": len(ds.comments.events),
            "comment_lines_skipped": [[n, msg] for n, msg in ds.comments.skipped],
            "merge_notes": [list(map(str, n)) for n in ds.notes],
            "span_count": sum(len(v) for v in ds.spans.values()),
            "dataset_end": ds.dataset_end,
        }, indent=2, sort_keys=True) + "\n"
        return files
    if cmd == "figures":
        hz = pl.hazards_stage(ds, cfg, args.months)
        for kind, table in hz.items():
            files[f"hazards_{kind.value}.csv"] = pl.hazards_csv(table)
        return files

    cs = pl.cohort_stage(ds, cfg)
    if cmd == "cohort":
        files["cohort.csv"] = pl.cohort_csv(cs)
        return files
    if cmd in ("label", "all"):
        files["labels.csv"] = pl.labels_csv(cs)
    if cmd == "all":
        hz = pl.hazards_stage(ds, cfg, args.months)
        for kind, table in hz.items():
            files[f"hazards_{kind.value}.csv"] = pl.hazards_csv(table)
    pairs = None
    if cmd in ("match", "predict", "all"):
        pairs = pl.match_stage(ds, cs, args.tolerance)
        if cmd != "predict":
            files["pairs.csv"] = pl.pairs_csv(pairs)
    feats = None
    if cmd in ("features", "predict", "all"):
        feats = pl.features_stage(ds, cs)
        if cmd != "predict":
            files["features.csv"] = pl.features_csv(feats)
    if cmd in ("cues", "stats", "all"):
        flags = pl.cues_stage(ds, cs, detector)
        if cmd != "stats":
            files["cues.csv"] = pl.cues_csv(flags)
        if cmd in ("stats", "all"):
            st = pl.stats_stage(ds, cs, flags)
            files["mosaics.csv"] = pl.mosaics_csv(st)
            files["fightin_words.csv"] = pl.fightin_csv(st)
    if cmd in ("predict", "all"):
        report = pl.predict_stage(pairs, feats, args.c_grid_values, args.dev_fraction,
                                  args.seed, args.epochs)
        files["table3.csv"] = pl.table3_csv(report)
        files["table3.json"] = pl.table3_json(report)
    return files


def _run_synth(args, out: Path) -> dict:
    from .synth import SynthConfig, generate

    cfg = SynthConfig(
        n_users=args.n_users,
        seed=args.seed,
        apology_recid_odds_ratio=args.apology_odds_ratio,
        block_rate=args.block_rate,
        unblock_rate=args.unblock_rate,
        dataset_days=args.dataset_days,
        horizon_days=args.horizon_days,
        short_window_days=args.short_window_days,
        min_tenure_days=args.min_tenure_days,
        min_comments=args.min_comments,
        community_burnin_days=args.burnin_days,
    )
    corpus = generate(cfg)
    cfg_json = json.loads(json.dumps(cfg.__dict__))
    cfg_json["dataset_end"] = cfg.dataset_end
    return {
        "blocks.jsonl": corpus.block_log_text(),
        "comments.jsonl": corpus.comments_text(),
        "truth.csv": corpus.truth_csv(),
        "synth.json": json.dumps(cfg_json, indent=2, sort_keys=True) + "\n",
    }


def _write(out: Path, files: dict) -> dict:
    digests = {}
    for name in sorted(files):
        data = files[name].encode("utf-8")
        (out / name).write_bytes(data)
        digests[name] = hashlib.sha256(data).hexdigest()
    return digests


def run(args) -> int:
    echo = validate(args)
    out = _prepare_out(args.out)
    if args.command == "synth":
        files = _run_synth(args, out)
        inputs = {}
    else:
        files = _run_analysis(args, out)
        inputs = {
            role: {"path": str(p), "sha256": _sha256(p)}
            for role, p in (("blocks", args.input_blocks), ("comments", args.input_comments),
                            ("reason_table", args.reason_table), ("lexicon", args.lexicon))
            if p is not None
        }
    manifest = {
        "command": args.command,
        "config": echo,
        "inputs": inputs,
        "versions": _versions(),
        "artifacts": _write(out, files),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return 0


def _report(code, exc, **extra):
    body = {"status": "error", "exit_code": code, "error": type(exc).__name__,
            "message": str(exc)}
    body.update(extra)
    print(json.dumps(body, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return EXIT_CONFIG if exc.code else 0
    try:
        return run(args)
    except InputMissing as exc:
        return _report(EXIT_DATA, exc, path=exc.path)
    except FileNotFoundError as exc:
        return _report(EXIT_DATA, exc, path=exc.filename)
    except ConfigError as exc:
        return _report(EXIT_CONFIG, exc)
    except DataError as exc:
        return _report(EXIT_DATA, exc)
    except Exception as exc:  # noqa: BLE001 - last-resort report
        return _report(EXIT_INTERNAL, exc)
