import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modtraj.errors import ConfigError, NoAuthoredComments
from modtraj.ingest import (
    DAY,
    Action,
    BlockLogEntry,
    CommentAction,
    CommentEvent,
    CommentIndex,
    PageKind,
    build_spans,
)
from modtraj.stats import wilson_ci
from modtraj.trajectory import (
    MONTH,
    CohortConfig,
    HazardKind,
    UserTimeline,
    build_timelines,
    cohort_exclusion,
    hazard_curves,
    label_cohort,
    label_user,
    select_cohort,
)

BURN = 1826 * DAY
END = BURN + 400 * DAY
CFG = CohortConfig(dataset_end=END)


def make_world(users):
    """``users`` maps name to (comment times, [(block start, duration, reason)])."""
    events, log = [], []
    k = 0
    for name, (times, blocks) in users.items():
        for t in times:
            events.append(CommentEvent(f"c{k}", name, f"art{k % 3}", PageKind.ARTICLE, int(t),
                                       CommentAction.ADD, "text"))
            k += 1
        for start, dur, reason in blocks:
            log.append(BlockLogEntry(int(start), "adm", name, Action.BLOCK, dur, reason))
    log.sort(key=lambda e: e.timestamp)
    return build_timelines(CommentIndex.from_events(events), build_spans(log))


def active(start, n, step=DAY):
    return [start + i * step for i in range(n)]


S = BURN + 100 * DAY  # a block start that passes burn-in and horizon checks


def test_basic_cohort_member():
    tl = make_world({"u": (active(S - 40 * DAY, 10) + [S + 30 * DAY], [(S, DAY, "edit warring")])})
    assert cohort_exclusion(tl["u"], CFG) is None
    assert select_cohort(tl, CFG) == ["u"]


@pytest.mark.parametrize(
    "n_comments,tenure_days,reason,start,dur,expected",
    [
        (8, 30, "edit warring", S, DAY, None),
        (7, 30, "edit warring", S, DAY, "comments"),
        (8, 29.9, "edit warring", S, DAY, "tenure"),
        (8, 30, "vandalism", S, DAY, "reason"),
        (8, 30, "harassment", S, None, "indefinite"),
        (8, 30, "harassment", BURN - 1, DAY, "burnin"),
        (8, 30, "harassment", BURN, DAY, None),
        (8, 30, "harassment", END - 180 * DAY, DAY, None),
        (8, 30, "harassment", END - 180 * DAY + 1, DAY, "horizon"),
    ],
)
def test_cohort_boundaries(n_comments, tenure_days, reason, start, dur, expected):
    first = start - int(tenure_days * DAY)
    times = [first] + [first + 1 + i for i in range(n_comments - 1)] + [start + DAY]
    tl = make_world({"u": (times, [(start, dur, reason)])})
    assert cohort_exclusion(tl["u"], CFG) == expected


def test_never_blocked_and_missing_end():
    tl = make_world({"u": (active(S, 3), [])})
    assert cohort_exclusion(tl["u"], CFG) == "never_blocked"
    with pytest.raises(ConfigError):
        cohort_exclusion(tl["u"], CohortConfig())


def test_config_validation():
    with pytest.raises(ConfigError):
        CohortConfig(short_window_days=200)
    with pytest.raises(ConfigError):
        CohortConfig(horizon_days=0)
    with pytest.raises(ConfigError):
        CohortConfig(recid_anchor="middle")


def _predicate_oracle(times, first_block, cfg):
    """The cohort rule restated as one boolean expression."""
    start, dur, reason = first_block
    n_before = sum(1 for t in times if t < start)
    first = min(times + [start])
    return (
        reason in ("edit warring", "harassment", "personal attack")
        and dur is not None
        and start >= cfg.community_burnin_days * DAY
        and start <= cfg.dataset_end - cfg.horizon_s
        and start - first >= cfg.min_tenure_days * DAY
        and n_before >= cfg.min_comments
    )


def test_cohort_matches_predicate_oracle():
    rng = np.random.default_rng(11)
    users, firsts = {}, {}
    for i in range(400):
        start = int(rng.integers(BURN - 50 * DAY, END))
        n = int(rng.integers(0, 30))
        times = sorted(int(x) for x in rng.integers(start - 120 * DAY, start + 60 * DAY, n))
        reason = ["edit warring", "harassment", "vandalism", "personal attack"][rng.integers(4)]
        dur = None if rng.random() < 0.1 else int(rng.integers(1, 5 * DAY))
        users[f"u{i:03d}"] = (times, [(start, dur, reason)])
        firsts[f"u{i:03d}"] = (times, (start, dur, reason))
    tl = make_world(users)
    expected = sorted(u for u, (t, b) in firsts.items() if _predicate_oracle(t, b, CFG))
    assert select_cohort(tl, CFG) == expected
    assert 20 < len(expected) < 300


def test_labels_examples():
    # block for 2 days, goes quiet at day 1, blocked again on day 5
    tl = make_world({"u": (active(S - 40 * DAY, 10) + [S + DAY],
                           [(S, 2 * DAY, "edit warring"), (S + 5 * DAY, DAY, "edit warring")])})
    lab = label_user(tl["u"], CFG)
    assert lab.departed_during_block and lab.departed_within_horizon
    assert lab.recidivist_short and lab.recidivist_long and not lab.reformed
    assert lab.time_to_reoffense_days == pytest.approx(5.0)
    assert lab.departure_time == S + DAY


def test_labels_stayer_reformed():
    tl = make_world({"u": (active(S - 40 * DAY, 10) + [S + 200 * DAY],
                           [(S, DAY, "edit warring"), (S + 190 * DAY, DAY, "edit warring")])})
    lab = label_user(tl["u"], CFG)
    assert not lab.departed_during_block and not lab.departed_within_horizon
    assert not lab.recidivist_long and lab.reformed
    assert lab.time_to_reoffense_days == pytest.approx(190.0)


def test_recid_anchor_end():
    tl = make_world({"u": (active(S - 40 * DAY, 10),
                           [(S, 3 * DAY, "edit warring"), (S + 9 * DAY, DAY, "edit warring")])})
    start = label_user(tl["u"], CFG)
    end = label_user(tl["u"], CohortConfig(dataset_end=END, recid_anchor="end"))
    assert not start.recidivist_short and end.recidivist_short
    assert end.time_to_reoffense_days == pytest.approx(6.0)


def test_no_authored_comments():
    tl = make_world({"u": ([], [(S, DAY, "edit warring")])})
    with pytest.raises(NoAuthoredComments):
        label_user(tl["u"], CFG)


def _random_world(seed, n=60):
    rng = np.random.default_rng(seed)
    users = {}
    for i in range(n):
        start = int(rng.integers(BURN, END - 200 * DAY))
        times = sorted(int(x) for x in rng.integers(start - 90 * DAY, start + 250 * DAY,
                                                    rng.integers(9, 30)))
        blocks = [(start, int(rng.integers(1, 20 * DAY)), "edit warring")]
        if rng.random() < 0.6:
            blocks.append((start + int(rng.integers(21 * DAY, 250 * DAY)), DAY, "harassment"))
        users[f"u{i:03d}"] = (times, blocks)
    return users


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_label_implications(seed):
    tl = make_world(_random_world(seed))
    labels = label_cohort(tl, select_cohort(tl, CFG), CFG)
    for lab in labels.values():
        if lab.departed_during_block:
            assert lab.departed_within_horizon
        if lab.recidivist_short:
            assert lab.recidivist_long
        assert lab.reformed != lab.recidivist_long


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(10, 150), st.floats(1, 100))
def test_horizon_monotone(seed, h1, extra):
    tl = make_world(_random_world(seed))
    small = CohortConfig(horizon_days=h1, dataset_end=END)
    large = CohortConfig(horizon_days=h1 + extra, dataset_end=END)
    users = [u for u in tl if cohort_exclusion(tl[u], large) is None]
    a = label_cohort(tl, users, small)
    b = label_cohort(tl, users, large)
    for u in users:
        assert a[u].recidivist_long <= b[u].recidivist_long
        assert a[u].departed_within_horizon <= b[u].departed_within_horizon


def test_permutation_invariance():
    users = _random_world(5)
    names = list(users)
    tl1 = make_world(users)
    tl2 = make_world({k: users[k] for k in reversed(names)})
    c1, c2 = select_cohort(tl1, CFG), select_cohort(tl2, CFG)
    assert c1 == c2
    assert label_cohort(tl1, c1, CFG) == label_cohort(tl2, c2, CFG)


# ---------------------------------------------------------------------------
# hazards


def test_never_blocked_population_has_empty_block_conditions():
    tl = make_world({f"u{i}": (active(0, 40, step=3 * DAY), []) for i in range(5)})
    # last activity on day 117 falls in month 4
    dep = hazard_curves(tl.values(), "departure", months=5)
    assert all(p is None for p in dep.series("blocked_prior"))
    assert all(p is None for p in dep.series("blocked_same_month"))
    assert dep.series("never_blocked") == [0.0, 0.0, 0.0, 1.0, None]


def test_single_user_hazards():
    # active days 0..75, blocked on day 40 (month 2)
    t = UserTimeline("u", 0, 75 * DAY)
    tl = make_world({"u": ([0, 75 * DAY], [(40 * DAY, DAY, "edit warring")])})["u"]
    assert (tl.first_activity, tl.last_activity) == (t.first_activity, t.last_activity)
    dep = hazard_curves([tl], HazardKind.DEPARTURE, months=4)
    assert dep.n_alive == [1, 1, 1, 0]
    assert dep.point(1, "never_blocked").p == 0.0
    assert dep.point(2, "blocked_same_month").p == 0.0
    assert dep.point(3, "blocked_prior").p == 1.0
    blk = hazard_curves([tl], "block", months=3)
    assert blk.point(2, "never_blocked").p == 1.0
    assert blk.point(2, "blocked_same_month").p == 0.0
    assert blk.point(3, "blocked_prior").p == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_hazard_counts_sum_to_alive(seed):
    tl = make_world(_random_world(seed, n=30))
    for kind in HazardKind:
        table = hazard_curves(tl.values(), kind, months=6)
        for m in range(1, 7):
            n = table.point(m, "never_blocked").n + table.point(m, "blocked_prior").n
            assert n == table.n_alive[m - 1]
            same = table.point(m, "blocked_same_month")
            assert same.n <= n
            for c in ("never_blocked", "blocked_prior", "blocked_same_month"):
                pt = table.point(m, c)
                if pt.p is not None:
                    assert pt.ci_lo <= pt.p <= pt.ci_hi


def test_dataset_end_truncates_months():
    tl = make_world({"u": (active(0, 200), [])})
    cfg = CohortConfig(dataset_end=int(3.5 * MONTH) + 180 * DAY)
    table = hazard_curves(tl.values(), "departure", months=6, cfg=cfg)
    assert table.n_alive == [1, 1, 1, 0, 0, 0]


def test_planted_monthly_departure_hazard():
    rng = np.random.default_rng(99)
    users = {}
    for i in range(3000):
        months_alive = int(rng.geometric(0.1))  # leaves in month k with P 0.9^(k-1) 0.1
        last = (months_alive - 1) * MONTH + int(rng.integers(0, MONTH))
        users[f"u{i}"] = ([0, last], [])
    tl = make_world(users)
    table = hazard_curves(tl.values(), "departure", months=6)
    for m in range(1, 7):
        pt = table.point(m, "never_blocked")
        lo, hi = wilson_ci(pt.events, pt.n, 0.999)
        assert lo <= 0.1 <= hi
