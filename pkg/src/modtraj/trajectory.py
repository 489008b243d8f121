"""Cohort selection, post-block trajectory labels and hazard curves.

All windows are fixed-length: a month is 30 days, the default horizon is
180 days and the community burn-in is 1826 days from the dataset epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import ConfigError, NoAuthoredComments
from .ingest import (
    DAY,
    DISRUPTION_SUBSET,
    BlockSpan,
    CommentAction,
    CommentIndex,
)

MONTH = 30 * DAY


@dataclass(frozen=True)
class CohortConfig:
    horizon_days: float = 180
    short_window_days: float = 7
    min_tenure_days: float = 30
    min_comments: int = 8
    community_burnin_days: float = 1826
    dataset_end: int | None = None
    recid_anchor: str = "start"

    def __post_init__(self):
        for name in ("horizon_days", "short_window_days", "min_tenure_days",
                     "community_burnin_days"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.min_comments < 0:
            raise ConfigError("min_comments must be non-negative")
        if self.short_window_days >= self.horizon_days:
            raise ConfigError("short_window_days must be below horizon_days")
        if self.recid_anchor not in ("start", "end"):
            raise ConfigError("recid_anchor is 'start' or 'end'")

    @property
    def horizon_s(self) -> float:
        return self.horizon_days * DAY

    @property
    def short_window_s(self) -> float:
        return self.short_window_days * DAY


@dataclass
class UserTimeline:
    user: str
    first_activity: int
    last_activity: int
    comments_authored: list = field(default_factory=list)
    comments_received: list = field(default_factory=list)
    spans: list = field(default_factory=list)

    @property
    def first_span(self) -> BlockSpan | None:
        return self.spans[0] if self.spans else None

    @property
    def ever_blocked(self) -> bool:
        return bool(self.spans)


def build_timelines(
    comments: CommentIndex, spans: Mapping[str, list[BlockSpan]]
) -> dict[str, UserTimeline]:
    """One timeline per comment author or block target.

    First and last activity come from authored comments; a user who was
    blocked but never wrote anything falls back to the first span start.
    """
    users = set(comments.by_author) | set(spans)
    out = {}
    for user in sorted(users):
        authored = comments.authored(user)
        user_spans = list(spans.get(user, ()))
        if authored:
            first, last = authored[0].timestamp, authored[-1].timestamp
        else:
            first = last = user_spans[0].start
        out[user] = UserTimeline(
            user=user,
            first_activity=first,
            last_activity=last,
            comments_authored=authored,
            comments_received=comments.received(user),
            spans=user_spans,
        )
    return out


def count_added_before(t: UserTimeline, cutoff: float) -> int:
    return sum(
        1
        for ev in t.comments_authored
        if ev.timestamp < cutoff and ev.action is CommentAction.ADD
    )


def cohort_exclusion(t: UserTimeline, cfg: CohortConfig) -> str | None:
    """Name of the first cohort filter ``t`` fails, or None if it passes."""
    if cfg.dataset_end is None:
        raise ConfigError("CohortConfig.dataset_end must be set for cohort selection")
    span = t.first_span
    if span is None:
        return "never_blocked"
    if span.reason_category not in DISRUPTION_SUBSET:
        return "reason"
    if span.is_indefinite:
        return "indefinite"
    if span.start < cfg.community_burnin_days * DAY:
        return "burnin"
    if span.start > cfg.dataset_end - cfg.horizon_s:
        return "horizon"
    if span.start - t.first_activity < cfg.min_tenure_days * DAY:
        return "tenure"
    if count_added_before(t, span.start) < cfg.min_comments:
        return "comments"
    return None


def select_cohort(timelines: Mapping[str, UserTimeline], cfg: CohortConfig) -> list[str]:
    """Users whose first block passes every study filter, sorted by id."""
    return sorted(u for u, t in timelines.items() if cohort_exclusion(t, cfg) is None)


@dataclass(frozen=True)
class TrajectoryLabel:
    departed_during_block: bool
    departed_within_horizon: bool
    recidivist_long: bool
    recidivist_short: bool
    time_to_reoffense_days: float | None
    departure_time: int | None

    @property
    def reformed(self) -> bool:
        return not self.recidivist_long


def label_departure(t: UserTimeline, cfg: CohortConfig):
    """Return ``(departed_during_block, departed_within_horizon, departure_time)``.

    Departure is the last authored comment event on any talk page. Leaving
    during the block also requires leaving within the horizon, so blocks
    longer than the horizon cannot break that implication.
    """
    if not t.comments_authored:
        raise NoAuthoredComments(t.user)
    span = t.first_span
    departure = t.comments_authored[-1].timestamp
    within = departure <= span.start + cfg.horizon_s
    during = within and departure < span.effective_end
    return during, within, departure


def label_recidivism(t: UserTimeline, cfg: CohortConfig):
    """Return ``(recidivist_long, recidivist_short, time_to_reoffense_days)``.

    Any second span counts as a re-offense. The delay is measured from the
    first span's start (or its effective end with ``recid_anchor='end'``)
    and reported even when it falls beyond the horizon.
    """
    if len(t.spans) < 2:
        return False, False, None
    first, second = t.spans[0], t.spans[1]
    anchor = first.start if cfg.recid_anchor == "start" else first.effective_end
    delay = second.start - anchor
    long_ = delay <= cfg.horizon_s
    short = delay <= cfg.short_window_s
    return long_, short, delay / DAY


def label_user(t: UserTimeline, cfg: CohortConfig) -> TrajectoryLabel:
    during, within, departure = label_departure(t, cfg)
    long_, short, tt = label_recidivism(t, cfg)
    return TrajectoryLabel(during, within, long_, short, tt, departure)


def label_cohort(
    timelines: Mapping[str, UserTimeline], cohort: Iterable[str], cfg: CohortConfig
) -> dict[str, TrajectoryLabel]:
    return {u: label_user(timelines[u], cfg) for u in cohort}


# ---------------------------------------------------------------------------
# hazard curves


class HazardKind(str, Enum):
    DEPARTURE = "departure"
    BLOCK = "block"


CONDITIONS = ("never_blocked", "blocked_prior", "blocked_same_month")


@dataclass(frozen=True)
class HazardPoint:
    month: int  # 1-based community-age month
    condition: str
    p: float | None
    ci_lo: float | None
    ci_hi: float | None
    n: int
    events: int


@dataclass
class HazardTable:
    kind: HazardKind
    points: list
    n_alive: list  # users at risk per month, index 0 is month 1

    def series(self, condition: str) -> list[float | None]:
        return [pt.p for pt in self.points if pt.condition == condition]

    def point(self, month: int, condition: str) -> HazardPoint:
        for pt in self.points:
            if pt.month == month and pt.condition == condition:
                return pt
        raise KeyError((month, condition))


def hazard_curves(
    timelines: Iterable[UserTimeline],
    kind: HazardKind | str,
    months: int = 12,
    cfg: CohortConfig | None = None,
    level: float = 0.95,
) -> HazardTable:
    """Monthly event probabilities by community age and block history.

    A user is at risk in month ``m`` if their last activity is not before the
    month start. The three conditions are: no span started before the month,
    some span started before the month, and some span starts inside the
    month. For block curves under the last condition the event is a further
    block in the same month.

    With ``cfg.dataset_end`` set, user-months are dropped unless fully
    observed (plus the horizon for departures, which otherwise could not be
    told apart from late activity).
    """
    from .stats import wilson_ci

    kind = HazardKind(kind)
    if months < 1:
        raise ConfigError("months must be >= 1")
    limit = math.inf
    if cfg is not None and cfg.dataset_end is not None:
        limit = cfg.dataset_end
        if kind is HazardKind.DEPARTURE:
            limit -= cfg.horizon_s

    events = {c: [0] * months for c in CONDITIONS}
    sizes = {c: [0] * months for c in CONDITIONS}
    alive = [0] * months
    for t in timelines:
        starts = [s.start for s in t.spans]
        for m in range(months):
            ms = t.first_activity + m * MONTH
            me = ms + MONTH
            if t.last_activity < ms or me > limit:
                break
            alive[m] += 1
            prior = any(s < ms for s in starts)
            in_month = sum(1 for s in starts if ms <= s < me)
            if kind is HazardKind.DEPARTURE:
                hit = ms <= t.last_activity < me
                hit_same = hit
            else:
                hit = in_month >= 1
                hit_same = in_month >= 2
            cond = "blocked_prior" if prior else "never_blocked"
            sizes[cond][m] += 1
            events[cond][m] += hit
            if in_month:
                sizes["blocked_same_month"][m] += 1
                events["blocked_same_month"][m] += hit_same

    points = []
    for m in range(months):
        for cond in CONDITIONS:
            n, k = sizes[cond][m], events[cond][m]
            if n == 0:
                points.append(HazardPoint(m + 1, cond, None, None, None, 0, 0))
            else:
                lo, hi = wilson_ci(k, n, level)
                points.append(HazardPoint(m + 1, cond, k / n, lo, hi, n, k))
    return HazardTable(kind, points, alive)
