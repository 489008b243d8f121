"""Stage orchestration and CSV/JSON export shared by the CLI and the demos.

Each stage is a plain function of the previous stages' in-memory results,
so a subcommand can recompute its upstream from the raw inputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, DegenerateTable, EmptyDataset, TooFewRows, ZeroExpectedCount
from .features import FEATURE_COLUMNS, DurationClass, user_features
from .ingest import (
    DAY,
    CommentIndex,
    ParsedLog,
    build_spans,
    load_comments,
    parse_block_log,
)
from .lingcues import CUES, CueDetector, CueFlags, cue_flags, in_block_messages, tokenize
from .matching import (
    MatchResult,
    PairKind,
    Window,
    match_departure_controls,
    match_departure_pairs,
    match_recidivism_controls,
    match_recidivism_pairs,
)
from .model import DEFAULT_C_GRID, DEFAULT_EPOCHS, DEFAULT_SEED, EvalReport, Task, run_all_tasks
from .stats import MosaicResult, fightin_words, mosaic_table
from .trajectory import (
    CohortConfig,
    HazardKind,
    cohort_exclusion,
    hazard_curves,
    label_cohort,
)

LABEL_COLUMNS = (
    "user", "departed_during", "departed_horizon", "recid_short", "recid_long",
    "reformed", "tt_reoffense_days", "departure_ts",
)
HAZARD_COLUMNS = ("month", "condition", "p", "ci_lo", "ci_hi", "n")
PAIR_COLUMNS = ("kind", "left", "right", "match_stat")
CUE_COLUMNS = ("user", "apology", "direct_question", "unfairness", "n_messages")
MOSAIC_COLUMNS = ("cue", "group", "recid_ratio", "reform_ratio", "n", "chi2", "p")
FIGHTIN_COLUMNS = ("word", "z", "count_a", "count_b")
SPAN_COLUMNS = (
    "target", "start", "original_end", "effective_end", "reason_category", "n_entries",
)
ONE_MONTH_S = 30 * DAY


# ---------------------------------------------------------------------------
# loading


@dataclass
class Dataset:
    log: ParsedLog
    comments: CommentIndex
    spans: dict
    timelines: dict
    dataset_end: int
    notes: list = field(default_factory=list)


def load_dataset(blocks_path, comments_path, strict=False, reason_table=None, dataset_end=None):
    log = parse_block_log(Path(blocks_path), strict=strict)
    comments = load_comments(Path(comments_path), strict=strict)
    return assemble_dataset(log, comments, reason_table, dataset_end)


def assemble_dataset(log: ParsedLog, comments: CommentIndex, reason_table=None, dataset_end=None):
    from .trajectory import build_timelines

    notes: list = []
    spans = build_spans(log.entries, reason_table=reason_table, notes=notes)
    timelines = build_timelines(comments, spans)
    if dataset_end is None:
        stamps = [e.timestamp for e in log.entries] + [ev.timestamp for ev in comments.events]
        if not stamps:
            raise DataError("inputs contain no records")
        dataset_end = max(stamps)
    return Dataset(log, comments, spans, timelines, int(dataset_end), notes)


# ---------------------------------------------------------------------------
# analysis stages


@dataclass
class CohortStage:
    cfg: CohortConfig
    exclusions: dict  # blocked user -> exclusion reason or None
    cohort: list
    labels: dict


def cohort_stage(ds: Dataset, cfg: CohortConfig) -> CohortStage:
    exclusions = {
        u: cohort_exclusion(t, cfg) for u, t in ds.timelines.items() if t.ever_blocked
    }
    cohort = sorted(u for u, why in exclusions.items() if why is None)
    return CohortStage(cfg, exclusions, cohort, label_cohort(ds.timelines, cohort, cfg))


def _actions_between(t, lo, hi):
    """Authored actions of any kind with ``lo < ts <= hi``."""
    return sum(1 for ev in t.comments_authored if lo < ev.timestamp <= hi)


def match_stage(
    ds: Dataset, cs: CohortStage, tol: float = 0.01, tol_days: float | None = None
) -> dict:
    """All five pair kinds keyed by :class:`PairKind`."""
    cfg = cs.cfg
    horizon_days = cfg.horizon_days
    labels = cs.labels
    tl = ds.timelines

    def start(u):
        return tl[u].first_span.start

    departers = {u: start(u) / DAY for u in cs.cohort if labels[u].departed_during_block}
    stayers = {u: start(u) / DAY for u in cs.cohort if not labels[u].departed_within_horizon}
    out = {PairKind.DEPARTURE_BLOCKED: match_departure_pairs(departers, stayers, tol, tol_days)}

    never = {
        u: (t.first_activity / DAY, t.last_activity / DAY)
        for u, t in tl.items()
        if not t.ever_blocked and t.comments_authored
    }
    out[PairKind.DEPARTURE_CONTROL] = match_departure_controls(
        out[PairKind.DEPARTURE_BLOCKED].pairs,
        {u: labels[u].departure_time / DAY for u in departers},
        never,
        horizon_days=horizon_days,
        observed_until_day=ds.dataset_end / DAY,
        tol=tol,
        tol_days=tol_days,
    )

    reformed = {
        u: _actions_between(tl[u], start(u), math.inf) for u in cs.cohort if labels[u].reformed
    }
    for window, flag in ((Window.LONG, "recidivist_long"), (Window.SHORT, "recidivist_short")):
        recid = {}
        for u in cs.cohort:
            if getattr(labels[u], flag):
                second = tl[u].spans[1].start
                recid[u] = _actions_between(tl[u], start(u), second)
        kind = PairKind.RECID_LONG if window is Window.LONG else PairKind.RECID_SHORT
        out[kind] = match_recidivism_pairs(recid, reformed, window)

    offenders = {
        u: (start(u), sum(1 for ev in tl[u].comments_authored if ev.timestamp < start(u)))
        for u in cs.cohort
    }
    pool = {
        u: (
            np.fromiter((ev.timestamp for ev in t.comments_authored), np.int64),
            t.first_span.start if t.ever_blocked else math.inf,
        )
        for u, t in tl.items()
        if u not in offenders
    }
    out[PairKind.RECID_CONTROL] = match_recidivism_controls(offenders, pool)
    return out


def features_stage(ds: Dataset, cs: CohortStage) -> dict:
    return {u: user_features(ds.timelines[u]) for u in cs.cohort}


def cues_stage(ds: Dataset, cs: CohortStage, detector: CueDetector | None = None) -> dict:
    det = detector or CueDetector()
    return {u: cue_flags(ds.timelines[u], ds.timelines[u].first_span, det) for u in cs.cohort}


def _safe_mosaic(outcome, present, cue):
    try:
        return mosaic_table(outcome, present, cue)
    except (ZeroExpectedCount, DegenerateTable):
        return None


@dataclass
class StatsStage:
    mosaics: list  # (name, MosaicResult | None)
    fightin: list


def stats_stage(ds: Dataset, cs: CohortStage, flags: Mapping[str, CueFlags], alpha0=500.0):
    """Cue mosaics, the unblock analyses and the block-severity comparisons.

    Cue mosaics are restricted to users who wrote during their block. The
    ``long_block_recid_short`` row uses short-term recidivism, the
    ``apology_unblocked`` row uses early unblock as the outcome and the
    ``long_block_departure_1m`` row uses departure within 30 days of the
    block start; their ``recid_ratio`` column holds that outcome's ratio.
    """
    labels = cs.labels
    tl = ds.timelines
    writers = [u for u in cs.cohort if flags[u].n_messages > 0]
    recid = {u: labels[u].recidivist_long for u in cs.cohort}
    mosaics = []
    for cue in CUES:
        mosaics.append((cue, _safe_mosaic({u: recid[u] for u in writers},
                                          {u: flags[u].get(cue) for u in writers}, cue)))
    unblocked = {u: tl[u].first_span.reduced_early for u in cs.cohort}
    mosaics.append(("unblocked_early", _safe_mosaic(recid, unblocked, "unblocked_early")))
    mosaics.append((
        "apology_unblocked",
        _safe_mosaic({u: unblocked[u] for u in writers},
                     {u: flags[u].apology for u in writers}, "apology_unblocked"),
    ))
    # severity comparisons use spans whose duration was never changed
    long_block = {
        u: tl[u].first_span.original_duration > DAY
        for u in cs.cohort
        if tl[u].first_span.unchanged
    }
    mosaics.append(("long_block", _safe_mosaic(recid, long_block, "long_block")))
    recid_short = {u: labels[u].recidivist_short for u in cs.cohort}
    mosaics.append((
        "long_block_recid_short",
        _safe_mosaic(recid_short, long_block, "long_block_recid_short"),
    ))
    left_1m = {
        u: labels[u].departure_time < tl[u].first_span.start + ONE_MONTH_S for u in long_block
    }
    mosaics.append((
        "long_block_departure_1m",
        _safe_mosaic(left_1m, long_block, "long_block_departure_1m"),
    ))

    bag_a, bag_b = [], []
    for u in writers:
        toks = [w for ev in in_block_messages(tl[u], tl[u].first_span) for w in tokenize(ev.text)]
        (bag_a if recid[u] else bag_b).extend(toks)
    fw = fightin_words(bag_a, bag_b, alpha0) if bag_a and bag_b else []
    return StatsStage(mosaics, fw)


TASK_KINDS = {
    Task.DEPARTURE: PairKind.DEPARTURE_BLOCKED,
    Task.RECID_LONG: PairKind.RECID_LONG,
    Task.RECID_SHORT: PairKind.RECID_SHORT,
}


def predict_stage(
    pairs: Mapping,
    features: Mapping,
    c_grid: Sequence[float] = DEFAULT_C_GRID,
    dev_fraction: float = 0.2,
    seed: int = DEFAULT_SEED,
    epochs: int = DEFAULT_EPOCHS,
) -> EvalReport:
    by_task = {task: pairs[kind].pairs for task, kind in TASK_KINDS.items()}
    try:
        return run_all_tasks(by_task, features, c_grid, dev_fraction, seed, epochs)
    except (TooFewRows, EmptyDataset):
        # the dev split can leave too few rows even when the pair count passes
        report = EvalReport()
        for task, pairs_ in by_task.items():
            try:
                part = run_all_tasks({task: pairs_}, features, c_grid, dev_fraction, seed, epochs)
            except (TooFewRows, EmptyDataset):
                continue
            report.results.update(part.results)
            report.p_values.update(part.p_values)
            report.best_baseline.update(part.best_baseline)
        return report


def hazards_stage(ds: Dataset, cfg: CohortConfig, months: int = 12) -> dict:
    timelines = [t for t in ds.timelines.values() if t.comments_authored]
    return {
        kind: hazard_curves(timelines, kind, months=months, cfg=cfg) for kind in HazardKind
    }


# ---------------------------------------------------------------------------
# export


def fmt(v) -> str:
    """Canonical CSV cell: bools as 0/1, floats via repr, None/NaN empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    if isinstance(v, DurationClass) or hasattr(v, "value"):
        return str(v.value)
    return str(v)


def to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def spans_csv(ds: Dataset) -> str:
    rows = []
    for target in sorted(ds.spans):
        for s in ds.spans[target]:
            end = "indefinite" if s.is_indefinite else s.original_end
            eff = "indefinite" if math.isinf(s.effective_end) else s.effective_end
            rows.append((target, s.start, end, eff, s.reason_category,
                         len(s.constituent_entries)))
    return to_csv(SPAN_COLUMNS, rows)


def cohort_csv(cs: CohortStage) -> str:
    rows = [(u, why is None, why or "") for u, why in sorted(cs.exclusions.items())]
    return to_csv(("user", "in_cohort", "exclusion"), rows)


def labels_csv(cs: CohortStage) -> str:
    rows = []
    for u in cs.cohort:
        lab = cs.labels[u]
        rows.append((
            u, lab.departed_during_block, lab.departed_within_horizon, lab.recidivist_short,
            lab.recidivist_long, lab.reformed, lab.time_to_reoffense_days, lab.departure_time,
        ))
    return to_csv(LABEL_COLUMNS, rows)


def hazards_csv(table) -> str:
    return to_csv(
        HAZARD_COLUMNS,
        ((p.month, p.condition, p.p, p.ci_lo, p.ci_hi, p.n) for p in table.points),
    )


def pairs_csv(pairs: Mapping) -> str:
    rows = []
    for kind in PairKind:
        res: MatchResult = pairs.get(kind) or MatchResult()
        rows += [(p.kind, p.left, p.right, p.match_stat) for p in res.pairs]
    return to_csv(PAIR_COLUMNS, rows)


def features_csv(features: Mapping) -> str:
    rows = []
    for u in sorted(features):
        r = features[u].as_row()
        rows.append([r[c] for c in FEATURE_COLUMNS])
    return to_csv(FEATURE_COLUMNS, rows)


def cues_csv(flags: Mapping[str, CueFlags]) -> str:
    return to_csv(
        CUE_COLUMNS,
        ((u, f.apology, f.direct_question, f.unfairness, f.n_messages)
         for u, f in sorted(flags.items())),
    )


def mosaics_csv(st: StatsStage) -> str:
    rows = []
    for name, res in st.mosaics:
        if res is None:
            rows.append((name, "degenerate", None, None, 0, None, None))
            continue
        for cue, group, rr, fr, n in res.rows() if _rows_ok(res) else ():
            rows.append((cue, group, rr, fr, n, res.test.statistic, res.test.p_value))
    return to_csv(MOSAIC_COLUMNS, rows)


def _rows_ok(res: MosaicResult) -> bool:
    t = res.table
    return (t.a + t.b) > 0 and (t.c + t.d) > 0


def fightin_csv(st: StatsStage) -> str:
    return to_csv(FIGHTIN_COLUMNS, ((r.word, r.z, r.count_a, r.count_b) for r in st.fightin))


def table3_csv(report: EvalReport) -> str:
    tasks = [t for t in Task if any(k[0] is t for k in report.results)]
    header = ["feature_set"]
    for t in tasks:
        header += [f"{t.value}_acc", f"{t.value}_p", f"{t.value}_sig"]
    rows = []
    for r in report.table_rows():
        rows.append([r.get(h) for h in header])
    return to_csv(header, rows)


def table3_json(report: EvalReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
