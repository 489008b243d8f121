"""Greedy matched-pair construction for the departure and recidivism studies.

Every matcher is deterministic: inputs are put in canonical order first,
then scanned once, and each user is used at most once per pair kind.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np


class PairKind(str, Enum):
    DEPARTURE_BLOCKED = "DepartureBlocked"
    DEPARTURE_CONTROL = "DepartureControl"
    RECID_SHORT = "RecidShort"
    RECID_LONG = "RecidLong"
    RECID_CONTROL = "RecidControl"


class Window(str, Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class MatchedPair:
    kind: PairKind
    left: str
    right: str
    match_stat: float


@dataclass
class MatchResult:
    pairs: list = field(default_factory=list)
    unmatched: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


def date_tolerance(day: float, tol: float, tol_days: float | None = None) -> float:
    """Allowed day difference: ``tol`` as a fraction of ``day`` unless absolute."""
    return tol_days if tol_days is not None else tol * abs(day)


class _SortedPool:
    """Sorted ``(key, user)`` pairs supporting range queries and removal."""

    def __init__(self, items):
        self.items = sorted((float(k), u) for u, k in items)
        self.keys = [k for k, _ in self.items]

    def remove_at(self, i):
        del self.items[i]
        del self.keys[i]

    def nearest(self, key, within, exclude=()):
        lo = bisect.bisect_left(self.keys, key - within)
        hi = bisect.bisect_right(self.keys, key + within)
        best = None
        for i in range(lo, hi):
            k, u = self.items[i]
            if u in exclude:
                continue
            cand = (abs(k - key), u, i)
            if best is None or cand < best:
                best = cand
        return best

    def smallest_at_least(self, key, exclude=()):
        i = bisect.bisect_left(self.keys, key)
        while i < len(self.items):
            if self.items[i][1] not in exclude:
                return i
            i += 1
        return None


def match_departure_pairs(
    departers: Mapping[str, float],
    stayers: Mapping[str, float],
    tol: float = 0.01,
    tol_days: float | None = None,
) -> MatchResult:
    """Pair users who left during their block with stayers blocked on a close date.

    ``departers`` and ``stayers`` map user to first-block day (days since the
    dataset epoch). Departers are scanned by (day, user); each takes the
    unused stayer with the nearest day inside the tolerance, ties broken by
    user id. ``match_stat`` is the absolute day difference.
    """
    pool = _SortedPool(stayers.items())
    out = MatchResult()
    for user, day in sorted(departers.items(), key=lambda kv: (kv[1], kv[0])):
        best = pool.nearest(float(day), date_tolerance(day, tol, tol_days), exclude=(user,))
        if best is None:
            out.unmatched.append(user)
            continue
        diff, right, i = best
        pool.remove_at(i)
        out.pairs.append(MatchedPair(PairKind.DEPARTURE_BLOCKED, user, right, diff))
    return out


def match_departure_controls(
    pairs,
    departure_day: Mapping[str, float],
    never_blocked: Mapping[str, tuple[float, float]],
    horizon_days: float = 180,
    observed_until_day: float = math.inf,
    tol: float = 0.01,
    tol_days: float | None = None,
) -> MatchResult:
    """Find a never-blocked departing/staying control pair for each blocked pair.

    ``departure_day`` gives the departure day of each blocked departer and
    ``never_blocked`` maps candidate users to ``(first_day, last_day)`` of
    their activity. A control departer's last day must lie within the
    tolerance of the blocked departer's departure day ``D``, and must be
    observable (``last_day + horizon_days <= observed_until_day``). A control
    stayer must have been active on ``D`` and until at least
    ``D + horizon_days``; the tightest such stayer is chosen. Pairs without
    both slots filled are reported in ``unmatched`` by blocked departer.
    """
    departing = _SortedPool(
        (u, last) for u, (first, last) in never_blocked.items()
        if last + horizon_days <= observed_until_day
    )
    staying = sorted(
        (last, u, first) for u, (first, last) in never_blocked.items()
    )
    stay_keys = [s[0] for s in staying]
    used: set[str] = set()
    out = MatchResult()
    for pair in pairs:
        d = float(departure_day[pair.left])
        best = departing.nearest(d, date_tolerance(d, tol, tol_days), exclude=used)
        if best is None:
            out.unmatched.append(pair.left)
            continue
        diff, dep, i = best
        stayer = None
        j = bisect.bisect_left(stay_keys, d + horizon_days)
        for last, u, first in staying[j:]:
            if u not in used and u != dep and first <= d:
                stayer = u
                break
        if stayer is None:
            out.unmatched.append(pair.left)
            continue
        departing.remove_at(i)
        used.update((dep, stayer))
        out.pairs.append(MatchedPair(PairKind.DEPARTURE_CONTROL, dep, stayer, diff))
    return out


def match_recidivism_pairs(
    recidivists: Mapping[str, int],
    reformed: Mapping[str, int],
    window: Window | str = Window.LONG,
) -> MatchResult:
    """Pair recidivists with reformed users who had at least as many actions.

    ``recidivists`` maps user to the number of actions between the first
    and second block; ``reformed`` maps user to lifetime actions after the
    first block. Recidivists are scanned by (count, user) and take the
    unused reformed user with the smallest count that is not below theirs.
    """
    kind = PairKind.RECID_SHORT if Window(window) is Window.SHORT else PairKind.RECID_LONG
    pool = _SortedPool(reformed.items())
    out = MatchResult()
    for user, count in sorted(recidivists.items(), key=lambda kv: (kv[1], kv[0])):
        i = pool.smallest_at_least(float(count), exclude=(user,))
        if i is None:
            out.unmatched.append(user)
            continue
        _, right = pool.items[i]
        pool.remove_at(i)
        out.pairs.append(MatchedPair(kind, user, right, count))
    return out


def match_recidivism_controls(
    offenders: Mapping[str, tuple[float, int]],
    clean_pool: Mapping[str, tuple[np.ndarray, float]],
) -> MatchResult:
    """Pair first-time offenders with users still clean at the offence time.

    ``offenders`` maps user to ``(block_time, pre-block action count)``.
    ``clean_pool`` maps candidate users to ``(sorted action timestamps,
    first block start or inf)``. A candidate qualifies for an offender
    blocked at ``T`` if it has no block starting at or before ``T`` and at
    least as many actions before ``T``; the smallest qualifying count wins.
    """
    offender_set = set(offenders)
    cand = sorted(u for u in clean_pool if u not in offender_set)
    ts_parts = [np.asarray(clean_pool[u][0], dtype=np.int64) for u in cand]
    owner = np.repeat(np.arange(len(cand)), [len(p) for p in ts_parts])
    flat_ts = np.concatenate(ts_parts) if ts_parts else np.zeros(0, np.int64)
    first_block = np.array([clean_pool[u][1] for u in cand], dtype=float)
    available = np.ones(len(cand), dtype=bool)
    names = np.array(cand, dtype=object)

    out = MatchResult()
    order = sorted(offenders.items(), key=lambda kv: (kv[1][1], kv[1][0], kv[0]))
    for user, (t, count) in order:
        counts = np.bincount(owner[flat_ts < t], minlength=len(cand))
        ok = available & (first_block > t) & (counts >= count)
        if not ok.any():
            out.unmatched.append(user)
            continue
        eligible = np.flatnonzero(ok)
        # candidates are sorted by id, so lexsort keeps id order among ties
        j = eligible[np.lexsort((eligible, counts[eligible]))[0]]
        available[j] = False
        out.pairs.append(MatchedPair(PairKind.RECID_CONTROL, user, str(names[j]), count))
    return out
