"""Pre-block engagement features and block-context features."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum

from .errors import CutoffBeforeFirstActivity, IndefiniteSpan
from .ingest import DAY, BlockSpan, CommentAction, PageKind, ReasonCategory

SHORT_BLOCK_MAX_S = DAY


class DurationClass(str, Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class EngagementFeatures:
    received_per_day: float
    contributed_per_day: float
    received_raw: int
    contributed_raw: int
    received_spread: float | None
    contributed_spread: float | None
    community_age_days: float


@dataclass(frozen=True)
class BlockContext:
    duration_class: DurationClass
    original_duration_s: float
    effective_duration_s: float
    reason_category: ReasonCategory
    unblocked_early: bool
    reduction_s: float
    unchanged: bool


def _counted_actions(include_edits: bool):
    if include_edits:
        return (CommentAction.ADD, CommentAction.EDIT)
    return (CommentAction.ADD,)


def contributed_comments(t, cutoff, include_edits=False):
    """Comments the user left on other users' talk pages before ``cutoff``."""
    actions = _counted_actions(include_edits)
    return [
        ev
        for ev in t.comments_authored
        if ev.timestamp < cutoff
        and ev.page_kind is PageKind.USER
        and ev.owner != t.user
        and ev.action in actions
    ]


def received_comments(t, cutoff, include_edits=False):
    actions = _counted_actions(include_edits)
    return [
        ev
        for ev in t.comments_received
        if ev.timestamp < cutoff and ev.action in actions
    ]


def activity_levels(t, cutoff, include_edits: bool = False):
    """Return ``(received_per_day, contributed_per_day, received_raw, contributed_raw)``.

    Rates are normalised by days between first activity and ``cutoff``.
    """
    if cutoff <= t.first_activity:
        raise CutoffBeforeFirstActivity(
            f"{t.user}: cutoff {cutoff} not after first activity {t.first_activity}"
        )
    days = (cutoff - t.first_activity) / DAY
    received = len(received_comments(t, cutoff, include_edits))
    contributed = len(contributed_comments(t, cutoff, include_edits))
    return received / days, contributed / days, received, contributed


def activity_spread(t, cutoff, include_edits: bool = False):
    """Return ``(received_spread, contributed_spread)``; None when no comments."""
    received = received_comments(t, cutoff, include_edits)
    contributed = contributed_comments(t, cutoff, include_edits)
    r = len({ev.author for ev in received}) / len(received) if received else None
    c = len({ev.owner for ev in contributed}) / len(contributed) if contributed else None
    return r, c


def engagement_features(t, cutoff, include_edits: bool = False) -> EngagementFeatures:
    rpd, cpd, rraw, craw = activity_levels(t, cutoff, include_edits)
    rs, cs = activity_spread(t, cutoff, include_edits)
    return EngagementFeatures(
        received_per_day=rpd,
        contributed_per_day=cpd,
        received_raw=rraw,
        contributed_raw=craw,
        received_spread=rs,
        contributed_spread=cs,
        community_age_days=(cutoff - t.first_activity) / DAY,
    )


def block_context(span: BlockSpan) -> BlockContext:
    """Severity and appeal outcome of one span.

    The short/long split uses the duration as imposed; early unblocks are
    read from the effective end.
    """
    if span.is_indefinite:
        raise IndefiniteSpan(f"{span.target}: span starting {span.start} is indefinite")
    original = span.original_duration
    return BlockContext(
        duration_class=(
            DurationClass.SHORT if original <= SHORT_BLOCK_MAX_S else DurationClass.LONG
        ),
        original_duration_s=original,
        effective_duration_s=span.effective_duration,
        reason_category=span.reason_category,
        unblocked_early=span.reduced_early,
        reduction_s=span.reduction,
        unchanged=span.unchanged,
    )


@dataclass(frozen=True)
class UserFeatures:
    """Everything the classifiers may see about one user at block time."""

    user: str
    engagement: EngagementFeatures
    context: BlockContext

    def as_row(self) -> dict:
        row = {"user": self.user}
        row.update(asdict(self.engagement))
        ctx = asdict(self.context)
        ctx["duration_class"] = self.context.duration_class.value
        ctx["reason_category"] = self.context.reason_category.value
        row.update(ctx)
        return row


FEATURE_COLUMNS = (
    "user",
    "received_per_day",
    "contributed_per_day",
    "received_raw",
    "contributed_raw",
    "received_spread",
    "contributed_spread",
    "community_age_days",
    "duration_class",
    "original_duration_s",
    "effective_duration_s",
    "reason_category",
    "unblocked_early",
    "reduction_s",
    "unchanged",
)


def user_features(t, include_edits: bool = False) -> UserFeatures:
    """Features of a blocked user computed at their first block's start."""
    span = t.first_span
    return UserFeatures(
        t.user, engagement_features(t, span.start, include_edits), block_context(span)
    )
