"""Deterministic synthetic block logs and talk-page records with planted effects.

The generator plans every user's history first (first activity, first
block, unblock, second block, departure, appeal messages) and only then
writes events consistent with that plan. Ground truth is read from the
plan, never from the analysis code, so comparing the two checks that the
pipeline and the generator agree on definitions.

Main users are ``u00000``...; ``bg0000``... are background users who only
write comments on main users' talk pages. Distributions are stylised,
loosely echoing a 1-day median block, a 15% unblock rate and a 45%
recidivism baseline, not fitted to real data.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfig
from .ingest import (
    DAY,
    Action,
    BlockLogEntry,
    CommentAction,
    CommentEvent,
    PageKind,
    ReasonCategory,
    serialize_block_log,
    serialize_comments,
)
from .trajectory import CohortConfig

HOUR = 3600

REASON_TEXTS = {
    ReasonCategory.PERSONAL_ATTACK: (
        "personal attacks or harassment",
        "[[WP:NPA|personal attacks]] on other editors",
        "incivility",
    ),
    ReasonCategory.HARASSMENT: ("harassment of another editor", "wikihounding and harassment"),
    ReasonCategory.EDIT_WARRING: (
        "edit warring",
        "edit warring: 3RR violation",
        "[[WP:3RR|three-revert rule]] violation",
    ),
    ReasonCategory.DISRUPTIVE_EDITING: ("disruptive editing", "continued disruptive editing"),
    ReasonCategory.PROTECTION: ("making legal threats", "repeated copyright violations"),
    ReasonCategory.OTHER_DISRUPTION: ("vandalism", "spamming links"),
}
DISRUPTION_CATEGORIES = (
    ReasonCategory.PERSONAL_ATTACK,
    ReasonCategory.HARASSMENT,
    ReasonCategory.EDIT_WARRING,
    ReasonCategory.DISRUPTIVE_EDITING,
)

NEUTRAL_SENTENCES = (
    "I made several changes to the article yesterday.",
    "The sources are listed on the article page.",
    "Please look at the edit history.",
    "I would like to keep working on the article.",
    "The earlier discussion is archived above.",
    "Thanks for your time.",
    "I have read the policy page.",
    "The figures came from a newspaper report.",
    "The template was updated last week.",
    "Several editors took part in that thread.",
)
APOLOGY_SENTENCES = (
    "I apologize for the disruption.",
    "I am sorry about the revert war.",
    "Please forgive me, it will not happen again.",
    "I regret my comments on the talk page.",
    "My mistake, I should have discussed it first.",
)
QUESTION_SENTENCES = (
    "Why was I blocked?",
    "What policy did I break?",
    "How is this block helping anyone?",
    "So what exactly did I do wrong?",
    "Who decided this?",
)
UNFAIR_SENTENCES = (
    "This block is unjustified.",
    "I was wrongly accused of vandalism.",
    "These claims are unfounded.",
    "This is an unfair block.",
    "Your use of admin tools here is unwarranted.",
)

VIOLATIONS = ("reason", "comments", "tenure", "burnin", "horizon", "indefinite")

TRUTH_COLUMNS = (
    "user",
    "blocked",
    "in_cohort",
    "exclusion",
    "departed_during",
    "departed_horizon",
    "recid_short",
    "recid_long",
    "reformed",
    "tt_reoffense_days",
    "departure_ts",
    "apology",
    "direct_question",
    "unfairness",
    "n_messages",
    "high_activity",
)


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 2000
    seed: int = 0
    monthly_departure_hazard: float = 0.1
    block_rate: float = 0.5
    recid_multiplier_for_high_activity: float = 1.5
    apology_recid_odds_ratio: float = 0.5
    question_recid_odds_ratio: float = 1.0
    unfairness_recid_odds_ratio: float = 1.0
    unblock_rate: float = 0.15
    median_block_duration_days: float = 1.0
    base_recid_rate: float = 0.45
    short_share_of_recid: float = 0.4
    depart_during_rate: float = 0.10
    depart_after_rate: float = 0.20
    message_rate: float = 0.7
    apology_rate: float = 0.35
    question_rate: float = 0.25
    unfairness_rate: float = 0.2
    ineligible_rate: float = 0.15
    activity_median_per_day: float = 0.08
    dataset_days: int = 3400
    horizon_days: float = 180
    short_window_days: float = 7
    min_tenure_days: float = 30
    min_comments: int = 8
    community_burnin_days: float = 1826

    def __post_init__(self):
        probs = (
            "monthly_departure_hazard", "block_rate", "unblock_rate", "base_recid_rate",
            "short_share_of_recid", "depart_during_rate", "depart_after_rate",
            "message_rate", "apology_rate", "question_rate", "unfairness_rate",
            "ineligible_rate",
        )
        for name in probs:
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"{name} must be a probability")
        factors = (
            "recid_multiplier_for_high_activity", "apology_recid_odds_ratio",
            "question_recid_odds_ratio", "unfairness_recid_odds_ratio",
            "median_block_duration_days", "activity_median_per_day",
        )
        for name in factors:
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.n_users <= 0:
            raise InvalidConfig("n_users must be positive")
        if self.depart_during_rate + self.depart_after_rate > 1:
            raise InvalidConfig("departure rates sum above 1")
        if not 0 < self.monthly_departure_hazard:
            raise InvalidConfig("monthly_departure_hazard must be positive")
        if self.dataset_days < self.community_burnin_days + self.horizon_days + 60:
            raise InvalidConfig("dataset too short for burn-in plus horizon")

    @property
    def dataset_end(self) -> int:
        return self.dataset_days * DAY

    def cohort_config(self) -> CohortConfig:
        return CohortConfig(
            horizon_days=self.horizon_days,
            short_window_days=self.short_window_days,
            min_tenure_days=self.min_tenure_days,
            min_comments=self.min_comments,
            community_burnin_days=self.community_burnin_days,
            dataset_end=self.dataset_end,
        )


@dataclass
class SynthCorpus:
    config: SynthConfig
    blocks: list
    comments: list
    truth: dict  # user -> truth row

    def block_log_text(self) -> str:
        return serialize_block_log(self.blocks)

    def comments_text(self) -> str:
        return serialize_comments(self.comments)

    def truth_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRUTH_COLUMNS)
        for user in sorted(self.truth):
            row = self.truth[user]
            writer.writerow([_csv_value(row[c]) for c in TRUTH_COLUMNS])
        return buf.getvalue()

    def write(self, directory) -> dict:
        """Write ``blocks.jsonl``, ``comments.jsonl``, ``truth.csv`` and ``synth.json``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {
            "blocks": d / "blocks.jsonl",
            "comments": d / "comments.jsonl",
            "truth": d / "truth.csv",
            "config": d / "synth.json",
        }
        paths["blocks"].write_text(self.block_log_text(), encoding="utf-8")
        paths["comments"].write_text(self.comments_text(), encoding="utf-8")
        paths["truth"].write_text(self.truth_csv(), encoding="utf-8")
        cfg = asdict(self.config)
        cfg["dataset_end"] = self.config.dataset_end
        paths["config"].write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return paths


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


@dataclass
class _Events:
    """Collects one user's comment events as tuples before ids are assigned."""

    rows: list = field(default_factory=list)

    def add(self, author, owner, kind, ts, action, text):
        self.rows.append((int(ts), author, owner, kind, action, text))


class _Generator:
    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg
        self.end = cfg.dataset_end
        self.n_bg = max(5, cfg.n_users // 10)
        self.bg = [f"bg{j:04d}" for j in range(self.n_bg)]
        self.admins = [f"admin{k:03d}" for k in range(max(3, cfg.n_users // 100))]
        self.blocks: list[BlockLogEntry] = []
        self.events = _Events()
        self.truth: dict[str, dict] = {}
        self.texts = list(NEUTRAL_SENTENCES) + [
            f"{a} {b}" for a in NEUTRAL_SENTENCES for b in NEUTRAL_SENTENCES if a != b
        ]

    # -- helpers ---------------------------------------------------------

    def _text(self, rng, extra=()):
        if not extra:
            return self.texts[int(rng.integers(0, len(self.texts)))]
        k = int(rng.integers(1, 3))
        sentences = [NEUTRAL_SENTENCES[i] for i in rng.choice(len(NEUTRAL_SENTENCES), k, replace=False)]
        for s in extra:
            sentences.insert(int(rng.integers(0, len(sentences) + 1)), s)
        return " ".join(sentences)

    def _activity(self, rng, user, times, lo, hi):
        """Ordinary authored events at ``times`` (adds) plus a few edits/deletes
        strictly inside ``(lo, hi)`` and between the first and last add, so
        they never move first or last activity."""
        n = len(times)
        if n:
            lo, hi = max(lo, min(times)), min(hi, max(times))
        if n:
            u = rng.random(n)
            bg_pick = rng.integers(0, self.n_bg, n)
            art_pick = rng.integers(0, 5000, n)
            text_pick = rng.integers(0, len(self.texts), n)
            for ts, ui, b, a, x in zip(times, u, bg_pick, art_pick, text_pick):
                # half to other users' talk pages, some to articles, the rest replies at home
                if ui < 0.5:
                    owner, kind = self.bg[b], PageKind.USER
                elif ui < 0.8:
                    owner, kind = f"article:{a}", PageKind.ARTICLE
                else:
                    owner, kind = user, PageKind.USER
                self.events.add(user, owner, kind, ts, CommentAction.ADD, self.texts[x])
        n_extra = int(rng.poisson(0.1 * n))
        if hi - lo > 2 and n_extra:
            for ts in rng.integers(lo + 1, hi, n_extra):
                owner = f"article:{int(rng.integers(0, 5000))}"
                if rng.random() < 0.5:
                    self.events.add(user, owner, PageKind.ARTICLE, ts, CommentAction.EDIT,
                                    self._text(rng))
                else:
                    self.events.add(user, owner, PageKind.ARTICLE, ts, CommentAction.DELETE, "")

    def _received(self, rng, user, lo, hi, rate_per_day):
        if hi <= lo:
            return
        n = int(rng.poisson(rate_per_day * (hi - lo) / DAY))
        if not n:
            return
        # a handful of regular correspondents gives spreads below 1
        k = int(rng.integers(1, 6))
        friends = rng.choice(self.n_bg, size=k, replace=False)
        who = friends[rng.integers(0, k, n)]
        text_pick = rng.integers(0, len(self.texts), n)
        for ts, j, x in zip(rng.integers(lo, hi, n), who, text_pick):
            self.events.add(self.bg[j], user, PageKind.USER, ts, CommentAction.ADD, self.texts[x])

    def _duration(self, rng):
        med = self.cfg.median_block_duration_days * DAY
        d = med * math.exp(1.0 * rng.standard_normal())
        hours = int(round(d / HOUR))
        return int(min(max(hours, 1), 90 * 24) * HOUR)

    def _block(self, rng, ts, target, duration, reason_cat):
        text = REASON_TEXTS[reason_cat][int(rng.integers(0, len(REASON_TEXTS[reason_cat])))]
        admin = self.admins[int(rng.integers(0, len(self.admins)))]
        self.blocks.append(BlockLogEntry(int(ts), admin, target, Action.BLOCK, duration, text))

    # -- users -----------------------------------------------------------

    def never_blocked(self, rng, user, rate):
        cfg = self.cfg
        f = int(rng.integers(1200 * DAY, self.end - 30 * DAY))
        months = int(rng.geometric(cfg.monthly_departure_hazard)) - 1
        life = int((months + rng.random()) * 30 * DAY)
        last = f + life
        if last > self.end:
            last = self.end
        n = int(rng.poisson(rate * (last - f) / DAY))
        times = [f] + sorted(int(x) for x in rng.integers(f, last + 1, n)) + ([last] if last > f else [])
        self._activity(rng, user, times, f, last)
        self._received(rng, user, f, last, 0.5 * rate)
        self.truth[user] = _truth_row(user, blocked=False, high_activity=rate > cfg.activity_median_per_day)

    def blocked(self, rng, user, rate):
        cfg = self.cfg
        horizon = int(cfg.horizon_days * DAY)
        burnin = int(cfg.community_burnin_days * DAY)
        violation = ""
        if rng.random() < cfg.ineligible_rate:
            violation = VIOLATIONS[int(rng.integers(0, len(VIOLATIONS)))]

        # first block time and tenure
        if violation == "burnin":
            t1 = int(rng.integers(burnin - 300 * DAY, burnin))
        elif violation == "horizon":
            t1 = int(rng.integers(self.end - horizon + DAY, self.end - DAY))
        else:
            t1 = int(rng.integers(burnin, self.end - horizon - 2 * DAY))
        if violation == "tenure":
            tenure = int(rng.integers(5 * DAY, int(cfg.min_tenure_days * DAY)))
        else:
            tenure = int(cfg.min_tenure_days * DAY) + int(rng.exponential(120 * DAY))
        f = t1 - tenure

        # pre-block adds: exactly k, the first at f
        if violation == "comments":
            k = int(rng.integers(max(1, cfg.min_comments - 5), cfg.min_comments))
        else:
            k = max(cfg.min_comments, int(rng.poisson(rate * tenure / DAY)))
        times = [f] + sorted(int(x) for x in rng.integers(f + 1, t1, k - 1))
        self._activity(rng, user, times, f, t1)
        self._received(rng, user, f, t1, 0.5 * rate)

        # first block
        if violation == "reason":
            category = (ReasonCategory.PROTECTION, ReasonCategory.OTHER_DISRUPTION)[int(rng.integers(0, 2))]
        else:
            category = DISRUPTION_CATEGORIES[int(rng.integers(0, 4))]
        duration = None if violation == "indefinite" else self._duration(rng)
        self._block(rng, t1, user, duration, category)
        if duration is None:
            # indefinitely blocked: only appeal chatter afterwards
            self.truth[user] = _truth_row(user, blocked=True, exclusion="indefinite",
                                          high_activity=rate > cfg.activity_median_per_day)
            return
        e1 = t1 + duration
        if duration > 2 * HOUR and rng.random() < cfg.unblock_rate:
            e1 = int(rng.integers(t1 + HOUR, t1 + duration))
            self.blocks.append(BlockLogEntry(e1, self.admins[int(rng.integers(0, len(self.admins)))],
                                             user, Action.UNBLOCK, None, "appeal granted"))

        # in-block messages and their planted cues
        writes = rng.random() < cfg.message_rate
        cues = {"apology": False, "direct_question": False, "unfairness": False}
        if writes:
            cues["apology"] = rng.random() < cfg.apology_rate
            cues["direct_question"] = rng.random() < cfg.question_rate
            cues["unfairness"] = rng.random() < cfg.unfairness_rate

        high = rate > cfg.activity_median_per_day
        odds = cfg.base_recid_rate / (1 - cfg.base_recid_rate)
        if cues["apology"]:
            odds *= cfg.apology_recid_odds_ratio
        if cues["direct_question"]:
            odds *= cfg.question_recid_odds_ratio
        if cues["unfairness"]:
            odds *= cfg.unfairness_recid_odds_ratio
        if high:
            odds *= cfg.recid_multiplier_for_high_activity
        recid_long = rng.random() < odds / (1 + odds)
        recid_short = recid_long and rng.random() < cfg.short_share_of_recid
        short_w = int(cfg.short_window_days * DAY)
        if recid_short and e1 - t1 >= short_w - HOUR:
            recid_short = False  # block too long to re-offend inside the window

        t2 = None
        if recid_short:
            t2 = int(rng.integers(e1 + HOUR, t1 + short_w + 1))
        elif recid_long:
            t2 = int(rng.integers(max(e1, t1 + short_w) + HOUR, t1 + horizon + 1))
        elif rng.random() < 0.3:
            t2 = int(t1 + horizon + HOUR + rng.integers(0, 400 * DAY))
            if t2 > self.end:
                t2 = None

        # departure plan
        u = rng.random()
        if not recid_long and u < cfg.depart_during_rate:
            plan = "during"
        elif u < cfg.depart_during_rate + cfg.depart_after_rate:
            plan = "after"
        else:
            plan = "stay"
        if plan == "after":
            lo = max(e1, t2 if recid_long else e1) + HOUR
            if lo > t1 + horizon:
                plan = "stay"
            else:
                departure = int(rng.integers(lo, t1 + horizon + 1))
        if plan == "stay":
            departure = t1 + horizon + HOUR + int(rng.exponential(300 * DAY))
            departure = min(departure, self.end)
            if t2 is not None:
                departure = max(departure, min(t2 + DAY, self.end))

        # in-block messages, on the user's own talk page inside [t1, e1)
        n_msg = 0
        if writes:
            n_msg = 1 + int(rng.poisson(1.0))
            msg_times = sorted(int(x) for x in rng.integers(t1, e1, n_msg))
            planted = [
                (APOLOGY_SENTENCES, cues["apology"]),
                (QUESTION_SENTENCES, cues["direct_question"]),
                (UNFAIR_SENTENCES, cues["unfairness"]),
            ]
            extras = [[] for _ in range(n_msg)]
            for pool, on in planted:
                if on:
                    extras[int(rng.integers(0, n_msg))].append(pool[int(rng.integers(0, len(pool)))])
            for ts, extra in zip(msg_times, extras):
                self.events.add(user, user, PageKind.USER, ts, CommentAction.ADD, self._text(rng, extra))
            if plan == "during":
                departure = msg_times[-1]
        if plan == "during" and not writes:
            departure = times[-1]

        # post-block activity up to the departure
        if plan != "during" and departure > e1:
            # late-window violators may be cut off by the dataset end first
            n = int(rng.poisson(rate * min(departure - e1, 90 * DAY) / DAY))
            post = sorted(int(x) for x in rng.integers(e1, departure, n))
            self._activity(rng, user, post + [departure], e1, departure)
            self._received(rng, user, e1, departure, 0.5 * rate)

        if t2 is not None:
            cat2 = list(ReasonCategory)[int(rng.integers(0, 6))]
            self._block(rng, t2, user, self._duration(rng), cat2)

        row = _truth_row(user, blocked=True, exclusion=violation, high_activity=high)
        if not violation:
            departed_horizon = departure <= t1 + horizon
            row.update(
                in_cohort=True,
                departed_during=departed_horizon and departure < e1,
                departed_horizon=departed_horizon,
                recid_short=recid_short,
                recid_long=recid_long,
                reformed=not recid_long,
                tt_reoffense_days=None if t2 is None else (t2 - t1) / DAY,
                departure_ts=departure,
                n_messages=n_msg,
                **cues,
            )
        self.truth[user] = row

    def run(self) -> SynthCorpus:
        cfg = self.cfg
        for i in range(cfg.n_users):
            user = f"u{i:05d}"
            rng = np.random.default_rng([cfg.seed, i])
            rate = cfg.activity_median_per_day * math.exp(0.7 * rng.standard_normal())
            if rng.random() < cfg.block_rate:
                self.blocked(rng, user, rate)
            else:
                self.never_blocked(rng, user, rate)
        # a marker event pins the observable end of the dataset
        self.events.add(self.bg[0], f"article:{0}", PageKind.ARTICLE, self.end,
                        CommentAction.ADD, "End of the collection window.")
        rows = sorted(
            (r for r in self.events.rows if r[0] <= self.end),
            key=lambda r: (r[0], r[1], r[2], r[4].value, r[5]),
        )
        comments = [
            CommentEvent(f"c{n:08d}", author, owner, kind, ts, action, text)
            for n, (ts, author, owner, kind, action, text) in enumerate(rows)
        ]
        blocks = sorted(
            (b for b in self.blocks if b.timestamp <= self.end),
            key=lambda b: (b.timestamp, b.target),
        )
        return SynthCorpus(cfg, blocks, comments, self.truth)


def _truth_row(user, blocked, exclusion="never_blocked", high_activity=False):
    row = {c: None for c in TRUTH_COLUMNS}
    row.update(
        user=user,
        blocked=blocked,
        in_cohort=False,
        exclusion=exclusion if blocked else "never_blocked",
        high_activity=high_activity,
        apology=False,
        direct_question=False,
        unfairness=False,
        n_messages=0,
    )
    return row


def generate(cfg: SynthConfig) -> SynthCorpus:
    """Build a synthetic corpus; equal configs give byte-identical output."""
    if not isinstance(cfg, SynthConfig):
        raise InvalidConfig("generate expects a SynthConfig")
    return _Generator(cfg).run()
