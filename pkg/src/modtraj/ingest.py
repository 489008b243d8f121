"""Block log and talk-page record ingestion.

Both inputs are line-delimited JSON. Block log lines look like::

    {"ts": 100, "admin": "A", "target": "B", "action": "block",
     "duration_s": 86400, "reason": "edit warring"}

``duration_s`` is an integer number of seconds or the string
``"indefinite"`` and is absent for unblocks. Comment lines carry ``id``,
``author``, ``owner``, ``page_kind`` (``user``/``article``), ``ts``,
``action`` (``add``/``edit``/``delete``) and ``text``.

Timestamps are integer seconds since the dataset epoch.
"""

from __future__ import annotations

import io
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import (
    DuplicateId,
    MalformedRecord,
    NonPositiveDuration,
    UnknownAction,
)

logger = logging.getLogger(__name__)

DAY = 86400
INDEFINITE = "indefinite"


class Action(str, Enum):
    BLOCK = "block"
    UNBLOCK = "unblock"
    MODIFY = "modify"


class PageKind(str, Enum):
    USER = "user"
    ARTICLE = "article"


class CommentAction(str, Enum):
    ADD = "add"
    EDIT = "edit"
    DELETE = "delete"


class ReasonCategory(str, Enum):
    PERSONAL_ATTACK = "PersonalAttack"
    HARASSMENT = "Harassment"
    EDIT_WARRING = "EditWarring"
    DISRUPTIVE_EDITING = "DisruptiveEditing"
    OTHER_DISRUPTION = "OtherDisruption"
    PROTECTION = "Protection"
    UNKNOWN = "Unknown"


DISRUPTION_SUBSET = frozenset(
    {
        ReasonCategory.PERSONAL_ATTACK,
        ReasonCategory.HARASSMENT,
        ReasonCategory.EDIT_WARRING,
        ReasonCategory.DISRUPTIVE_EDITING,
    }
)

# Lookup order; the first category with a matching substring wins.
REASON_PRIORITY = (
    ReasonCategory.PERSONAL_ATTACK,
    ReasonCategory.HARASSMENT,
    ReasonCategory.EDIT_WARRING,
    ReasonCategory.DISRUPTIVE_EDITING,
    ReasonCategory.PROTECTION,
    ReasonCategory.OTHER_DISRUPTION,
)

DEFAULT_REASON_TABLE: dict[ReasonCategory, tuple[str, ...]] = {
    ReasonCategory.PERSONAL_ATTACK: (
        "personal attack",
        "incivility",
        "uncivil",
        "civility",
        "wp:npa",
    ),
    ReasonCategory.HARASSMENT: ("harass", "hounding", "stalking", "wp:hound"),
    ReasonCategory.EDIT_WARRING: (
        "edit war",
        "edit-war",
        "editwar",
        "3rr",
        "three-revert",
        "three revert",
    ),
    ReasonCategory.DISRUPTIVE_EDITING: ("disruptive", "disruption"),
    ReasonCategory.PROTECTION: (
        "legal threat",
        "copyright",
        "copyvio",
        "personal information",
        "outing",
        "privacy",
    ),
    ReasonCategory.OTHER_DISRUPTION: (
        "vandal",
        "spam",
        "sock",
        "block evasion",
        "username",
        "trolling",
    ),
}


def categorize_reason(reason_text: str, table: Mapping | None = None) -> ReasonCategory:
    """Map a free-text block reason to a :class:`ReasonCategory`.

    Matching is lowercase substring lookup; categories are tried in
    ``REASON_PRIORITY`` order and the first hit wins.
    """
    table = DEFAULT_REASON_TABLE if table is None else table
    text = (reason_text or "").lower()
    if not text:
        return ReasonCategory.UNKNOWN
    for category in REASON_PRIORITY:
        for needle in table.get(category, ()):
            if needle and needle in text:
                return category
    return ReasonCategory.UNKNOWN


def load_reason_table(path) -> dict[ReasonCategory, tuple[str, ...]]:
    """Read a JSON object ``{category name: [substring, ...]}``."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    table = {}
    for name, needles in raw.items():
        table[ReasonCategory(name)] = tuple(str(n).lower() for n in needles)
    return table


# ---------------------------------------------------------------------------
# block log


@dataclass(frozen=True)
class BlockLogEntry:
    timestamp: int
    admin: str
    target: str
    action: Action
    duration: int | None = None  # seconds; None on block/modify means indefinite
    reason_text: str = ""

    @property
    def is_indefinite(self) -> bool:
        return self.action is not Action.UNBLOCK and self.duration is None

    @property
    def end(self) -> float:
        if self.action is Action.UNBLOCK:
            raise ValueError("unblock entries have no end")
        return math.inf if self.duration is None else self.timestamp + self.duration

    def to_record(self) -> dict:
        rec = {
            "ts": self.timestamp,
            "admin": self.admin,
            "target": self.target,
            "action": self.action.value,
        }
        if self.action is not Action.UNBLOCK:
            rec["duration_s"] = INDEFINITE if self.duration is None else self.duration
        rec["reason"] = self.reason_text
        return rec

    @classmethod
    def from_record(cls, rec, line=None) -> "BlockLogEntry":
        if not isinstance(rec, dict):
            raise MalformedRecord("record is not a JSON object", line)
        ts = rec.get("ts")
        if not _is_int(ts) or ts < 0:
            raise MalformedRecord(f"bad timestamp {ts!r}", line)
        admin, target = rec.get("admin"), rec.get("target")
        if not isinstance(admin, str) or not isinstance(target, str) or not target:
            raise MalformedRecord("admin and target must be strings", line)
        try:
            action = Action(rec.get("action"))
        except ValueError:
            raise UnknownAction(f"unknown action {rec.get('action')!r}", line) from None
        reason = rec.get("reason", "")
        if not isinstance(reason, str):
            raise MalformedRecord("reason must be a string", line)

        if action is Action.UNBLOCK:
            if rec.get("duration_s") is not None:
                raise MalformedRecord("unblock entries carry no duration", line)
            duration = None
        else:
            raw = rec.get("duration_s")
            if raw == INDEFINITE:
                duration = None
            elif _is_int(raw):
                if raw <= 0:
                    raise NonPositiveDuration(f"duration {raw} is not positive", line)
                duration = raw
            else:
                raise MalformedRecord(f"bad duration {raw!r}", line)
        return cls(ts, admin, target, action, duration, reason)


@dataclass
class ParsedLog:
    """Parse output: the good entries plus ``(line number, message)`` per skip."""

    entries: list
    skipped: list = field(default_factory=list)

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _iter_lines(source) -> Iterator[tuple[int, str | None]]:
    """Yield ``(line number, decoded text or None if undecodable)``."""
    if isinstance(source, Path):
        source = source.read_bytes()
    if isinstance(source, str):
        source = source.encode("utf-8")
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, str):
            yield lineno, raw
            continue
        try:
            yield lineno, raw.decode("utf-8")
        except UnicodeDecodeError:
            yield lineno, None


def _parse_lines(source, build, strict) -> ParsedLog:
    out = ParsedLog([])
    for lineno, text in _iter_lines(source):
        try:
            if text is None:
                raise MalformedRecord("invalid UTF-8", lineno)
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON ({exc.msg})", lineno) from None
            out.entries.append(build(rec, lineno))
        except MalformedRecord as exc:
            if strict:
                raise
            out.skipped.append((lineno, str(exc)))
    if out.skipped:
        logger.warning("skipped %d malformed lines", len(out.skipped))
    return out


def parse_block_log(source, strict: bool = False) -> ParsedLog:
    """Parse a line-delimited JSON block log.

    ``source`` may be bytes, str content, a ``Path``, or an open (binary or
    text) file.
    Malformed lines are skipped and reported unless ``strict`` is set, in
    which case the first one raises :class:`MalformedRecord`.
    """
    return _parse_lines(source, BlockLogEntry.from_record, strict)


def serialize_block_log(entries: Iterable[BlockLogEntry]) -> str:
    return "".join(
        json.dumps(e.to_record(), ensure_ascii=False) + "\n" for e in entries
    )


# ---------------------------------------------------------------------------
# block spans


@dataclass(frozen=True)
class BlockSpan:
    """One effective, contiguous blocked interval ``[start, effective_end)``.

    ``original_end`` is the latest end ever scheduled for the span (``inf``
    for indefinite blocks); ``reduction`` is how much earlier it actually
    ended.
    """

    target: str
    start: int
    original_end: float
    effective_end: float
    reason_category: ReasonCategory
    constituent_entries: tuple = ()

    @property
    def reduction(self) -> float:
        if self.original_end == self.effective_end:
            return 0.0
        return self.original_end - self.effective_end

    @property
    def reduced_early(self) -> bool:
        return self.reduction > 0

    @property
    def is_indefinite(self) -> bool:
        return math.isinf(self.original_end)

    @property
    def original_duration(self) -> float:
        return self.original_end - self.start

    @property
    def effective_duration(self) -> float:
        return self.effective_end - self.start

    @property
    def unchanged(self) -> bool:
        """True when the span is a single block that was never modified."""
        return len(self.constituent_entries) == 1


class _OpenSpan:
    __slots__ = ("start", "eff", "orig", "reason", "entries")

    def __init__(self, entry, table):
        self.start = entry.timestamp
        self.eff = self.orig = entry.end
        self.reason = categorize_reason(entry.reason_text, table)
        self.entries = [entry]

    def close(self, target):
        return BlockSpan(
            target=target,
            start=self.start,
            original_end=self.orig,
            effective_end=self.eff,
            reason_category=self.reason,
            constituent_entries=tuple(self.entries),
        )


def merge_block_spans(
    entries: Sequence[BlockLogEntry],
    reason_table: Mapping | None = None,
    notes: list | None = None,
) -> list[BlockSpan]:
    """Collapse one user's time-sorted block log entries into spans.

    * a block opens ``[t, t + duration)``; a block issued while a span is
      active (or exactly at its end) extends it to the union;
    * a modify issued while active replaces the end with ``t + duration``;
    * an unblock issued while active truncates the span at ``t``.

    Unblocks and modifies with no active span are ignored and described in
    ``notes`` when a list is supplied.
    """
    spans: list[BlockSpan] = []
    cur: _OpenSpan | None = None
    target = None

    def note(entry, msg):
        if notes is not None:
            notes.append((entry, msg))
        logger.debug("%s: %s", entry.target, msg)

    last_ts = -math.inf
    for e in entries:
        if target is None:
            target = e.target
        elif e.target != target:
            raise ValueError("merge_block_spans expects entries for one target")
        if e.timestamp < last_ts:
            raise ValueError("entries must be sorted by timestamp")
        last_ts = e.timestamp
        t = e.timestamp

        if e.action is Action.BLOCK:
            if cur is not None and t <= cur.eff:
                cur.eff = max(cur.eff, e.end)
                cur.orig = max(cur.orig, cur.eff)
                cur.entries.append(e)
            else:
                if cur is not None:
                    spans.append(cur.close(target))
                cur = _OpenSpan(e, reason_table)
        elif e.action is Action.MODIFY:
            if cur is not None and t < cur.eff:
                cur.eff = e.end
                cur.orig = max(cur.orig, cur.eff)
                cur.entries.append(e)
            else:
                note(e, "ModifyWithoutActiveBlock")
        else:
            if cur is not None and t < cur.eff:
                cur.eff = t
                cur.entries.append(e)
                if cur.eff <= cur.start:
                    note(e, "span unblocked at its own start; dropped")
                    cur = None
            else:
                note(e, "UnblockWithoutActiveBlock")
    if cur is not None:
        spans.append(cur.close(target))
    return spans


def build_spans(
    entries: Iterable[BlockLogEntry],
    reason_table: Mapping | None = None,
    notes: list | None = None,
) -> dict[str, list[BlockSpan]]:
    """Group a whole log by target and merge each user's entries.

    The sort is stable, so entries sharing a timestamp keep file order.
    """
    by_target: dict[str, list[BlockLogEntry]] = defaultdict(list)
    for e in entries:
        by_target[e.target].append(e)
    out = {}
    for target in sorted(by_target):
        seq = sorted(by_target[target], key=lambda e: e.timestamp)
        spans = merge_block_spans(seq, reason_table, notes)
        if spans:
            out[target] = spans
    return out


# ---------------------------------------------------------------------------
# comments


@dataclass(frozen=True)
class CommentEvent:
    id: str
    author: str
    owner: str
    page_kind: PageKind
    timestamp: int
    action: CommentAction
    text: str = ""

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "author": self.author,
            "owner": self.owner,
            "page_kind": self.page_kind.value,
            "ts": self.timestamp,
            "action": self.action.value,
            "text": self.text,
        }

    @classmethod
    def from_record(cls, rec, line=None) -> "CommentEvent":
        if not isinstance(rec, dict):
            raise MalformedRecord("record is not a JSON object", line)
        for key in ("id", "author", "owner"):
            if not isinstance(rec.get(key), str) or not rec[key]:
                raise MalformedRecord(f"missing or empty {key!r}", line)
        ts = rec.get("ts")
        if not _is_int(ts) or ts < 0:
            raise MalformedRecord(f"bad timestamp {ts!r}", line)
        try:
            kind = PageKind(rec.get("page_kind"))
            action = CommentAction(rec.get("action"))
        except ValueError:
            raise MalformedRecord("bad page_kind or action", line) from None
        text = rec.get("text", "")
        if text is None:
            text = ""
        if not isinstance(text, str):
            raise MalformedRecord("text must be a string", line)
        if not text and action is not CommentAction.DELETE:
            raise MalformedRecord("empty text on a non-delete action", line)
        return cls(rec["id"], rec["author"], rec["owner"], kind, ts, action, text)


def _event_key(ev: CommentEvent):
    return (ev.timestamp, ev.id)


@dataclass
class CommentIndex:
    """Comment events indexed by author and by ``(page_kind, owner)``.

    All lists are sorted by ``(timestamp, id)``.
    """

    events: list
    by_author: dict
    by_owner: dict
    skipped: list = field(default_factory=list)

    @classmethod
    def from_events(cls, events: Iterable[CommentEvent], skipped=None) -> "CommentIndex":
        seen = set()
        by_author = defaultdict(list)
        by_owner = defaultdict(list)
        ordered = sorted(events, key=_event_key)
        for ev in ordered:
            if ev.id in seen:
                raise DuplicateId(f"duplicate comment id {ev.id!r}")
            seen.add(ev.id)
            by_author[ev.author].append(ev)
            by_owner[(ev.page_kind, ev.owner)].append(ev)
        return cls(ordered, dict(by_author), dict(by_owner), list(skipped or []))

    def __len__(self):
        return len(self.events)

    def authored(self, user: str) -> list:
        return self.by_author.get(user, [])

    def received(self, user: str) -> list:
        """Comments by other users on ``user``'s own talk page."""
        return [
            ev
            for ev in self.by_owner.get((PageKind.USER, user), [])
            if ev.author != user
        ]


def load_comments(source, strict: bool = False) -> CommentIndex:
    """Parse a comments file into a :class:`CommentIndex`.

    Duplicate ids always raise :class:`DuplicateId`.
    """
    parsed = _parse_lines(source, CommentEvent.from_record, strict)
    return CommentIndex.from_events(parsed.entries, parsed.skipped)


def serialize_comments(events: Iterable[CommentEvent]) -> str:
    return "".join(
        json.dumps(ev.to_record(), ensure_ascii=False) + "\n" for ev in events
    )
