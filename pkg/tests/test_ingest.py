import json
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modtraj.errors import DuplicateId, MalformedRecord, NonPositiveDuration, UnknownAction
from modtraj.ingest import (
    DAY,
    Action,
    BlockLogEntry,
    CommentAction,
    CommentEvent,
    CommentIndex,
    PageKind,
    ReasonCategory,
    build_spans,
    categorize_reason,
    load_comments,
    load_reason_table,
    merge_block_spans,
    parse_block_log,
    serialize_block_log,
    serialize_comments,
)

from _oracles import RASTER_END, random_block_log, rasterize_spans


def block(t, dur, target="B", reason="edit warring"):
    return BlockLogEntry(t, "A", target, Action.BLOCK, dur, reason)


def unblock(t, target="B"):
    return BlockLogEntry(t, "A", target, Action.UNBLOCK, None, "appeal")


def modify(t, dur, target="B"):
    return BlockLogEntry(t, "A", target, Action.MODIFY, dur, "adjusted")


# ---------------------------------------------------------------------------
# parsing


def test_empty_stream():
    parsed = parse_block_log(b"")
    assert parsed.entries == [] and parsed.n_skipped == 0


def test_single_block_line():
    line = json.dumps({"ts": 100, "admin": "A", "target": "B", "action": "block",
                       "duration_s": 86400, "reason": "edit warring"})
    (e,) = parse_block_log(line + "\n").entries
    assert e == BlockLogEntry(100, "A", "B", Action.BLOCK, 86400, "edit warring")


def _fixture_lines():
    rng = np.random.default_rng(7)
    lines, bad = [], []
    for i in range(50):
        if i in (4, 17, 33):
            lines.append(["{not json", '{"ts": -1, "admin": "a", "target": "b", "action": "block", '
                          '"duration_s": 5, "reason": ""}', '[1, 2]'][len(bad)])
            bad.append(i + 1)
            continue
        rec = {"ts": int(rng.integers(0, 10**6)), "admin": "a", "target": f"u{i % 7}",
               "action": "block", "duration_s": int(rng.integers(1, 10**5)), "reason": "x"}
        lines.append(json.dumps(rec))
    return lines, bad


def test_fixture_with_corrupted_lines():
    lines, bad = _fixture_lines()
    parsed = parse_block_log("\n".join(lines) + "\n")
    # independent count: lines that are JSON objects with a non-negative int ts
    good = 0
    for ln in lines:
        try:
            rec = json.loads(ln)
        except ValueError:
            continue
        good += isinstance(rec, dict) and rec["ts"] >= 0
    assert len(parsed.entries) == good == 47
    assert [n for n, _ in parsed.skipped] == bad


def test_strict_fails_fast_with_line_number():
    lines, _ = _fixture_lines()
    with pytest.raises(MalformedRecord, match="line 5"):
        parse_block_log("\n".join(lines), strict=True)


@pytest.mark.parametrize(
    "rec,err",
    [
        ({"ts": 1, "admin": "a", "target": "b", "action": "ban", "duration_s": 5}, UnknownAction),
        ({"ts": 1, "admin": "a", "target": "b", "action": "block", "duration_s": 0}, NonPositiveDuration),
        ({"ts": 1, "admin": "a", "target": "b", "action": "unblock", "duration_s": 5}, MalformedRecord),
        ({"ts": 1.5, "admin": "a", "target": "b", "action": "block", "duration_s": 5}, MalformedRecord),
    ],
)
def test_record_errors(rec, err):
    with pytest.raises(err):
        parse_block_log(json.dumps(rec), strict=True)
    assert parse_block_log(json.dumps(rec)).n_skipped == 1


def test_invalid_utf8_is_skipped():
    good = json.dumps({"ts": 1, "admin": "a", "target": "b", "action": "unblock"}).encode()
    parsed = parse_block_log(good + b"\n\xff\xfe\n")
    assert len(parsed.entries) == 1 and parsed.skipped[0][0] == 2


entry_strategy = st.builds(
    lambda ts, action, dur, reason: BlockLogEntry(
        ts, "adm", "tgt", action, None if action is Action.UNBLOCK else dur, reason
    ),
    st.integers(0, 10**9),
    st.sampled_from(list(Action)),
    st.one_of(st.none(), st.integers(1, 10**8)),
    st.text(max_size=20),
)


@settings(max_examples=100, deadline=None)
@given(st.lists(entry_strategy, max_size=20))
def test_round_trip(entries):
    text = serialize_block_log(entries)
    again = parse_block_log(text, strict=True).entries
    assert again == entries
    assert serialize_block_log(again) == text


def test_path_and_file_sources(tmp_path):
    entries = [block(5, 10), unblock(9)]
    p = tmp_path / "log.jsonl"
    p.write_text(serialize_block_log(entries))
    assert parse_block_log(p).entries == entries
    with open(p, "rb") as fh:
        assert parse_block_log(fh).entries == entries


# ---------------------------------------------------------------------------
# reasons


@pytest.mark.parametrize(
    "text,expected",
    [
        ("personal attacks or harassment", ReasonCategory.PERSONAL_ATTACK),
        ("edit warring: 3RR violation", ReasonCategory.EDIT_WARRING),
        ("[[WP:3RR|three-revert rule]] violation", ReasonCategory.EDIT_WARRING),
        ("Wikihounding", ReasonCategory.HARASSMENT),
        ("disruptive editing", ReasonCategory.DISRUPTIVE_EDITING),
        ("making legal threats", ReasonCategory.PROTECTION),
        ("vandalism", ReasonCategory.OTHER_DISRUPTION),
        ("", ReasonCategory.UNKNOWN),
        ("no reason given", ReasonCategory.UNKNOWN),
    ],
)
def test_categorize_reason(text, expected):
    assert categorize_reason(text) is expected


@settings(max_examples=200, deadline=None)
@given(st.text())
def test_categorize_total_and_deterministic(text):
    assert categorize_reason(text) is categorize_reason(text)


def test_custom_reason_table(tmp_path):
    p = tmp_path / "table.json"
    p.write_text(json.dumps({"Harassment": ["grief"], "EditWarring": ["revert"]}))
    table = load_reason_table(p)
    assert categorize_reason("griefing and revert", table) is ReasonCategory.HARASSMENT
    assert categorize_reason("edit warring", table) is ReasonCategory.UNKNOWN


# ---------------------------------------------------------------------------
# spans


def test_unblock_truncates():
    (s,) = merge_block_spans([block(0, 7 * DAY), unblock(2 * DAY)])
    assert (s.start, s.effective_end, s.original_end) == (0, 2 * DAY, 7 * DAY)
    assert s.reduced_early and s.reduction == 5 * DAY


def test_overlapping_blocks_union():
    (s,) = merge_block_spans([block(0, 3 * DAY), block(2 * DAY, 5 * DAY)])
    assert (s.start, s.effective_end) == (0, 7 * DAY)
    assert not s.reduced_early
    assert len(s.constituent_entries) == 2


def test_disjoint_blocks_and_reason_of_first():
    spans = merge_block_spans([block(0, 10, reason="edit warring"),
                               block(5, 3, reason="harassment"),
                               block(20, 5, reason="harassment")])
    assert [(s.start, s.effective_end) for s in spans] == [(0, 10), (20, 25)]
    assert spans[0].reason_category is ReasonCategory.EDIT_WARRING
    assert spans[1].reason_category is ReasonCategory.HARASSMENT


def test_modify_replaces_end():
    (s,) = merge_block_spans([block(0, 100), modify(10, 20)])
    assert s.effective_end == 30 and s.original_end == 100 and s.reduction == 70
    (s,) = merge_block_spans([block(0, 100), modify(10, 500)])
    assert s.effective_end == 510 and not s.reduced_early


def test_orphan_unblock_and_modify_are_noted():
    notes = []
    spans = merge_block_spans([unblock(0), modify(1, 5), block(10, 5), unblock(20)], notes=notes)
    assert [(s.start, s.effective_end) for s in spans] == [(10, 15)]
    assert [msg for _, msg in notes] == [
        "UnblockWithoutActiveBlock", "ModifyWithoutActiveBlock", "UnblockWithoutActiveBlock"
    ]


def test_indefinite_span():
    (s,) = merge_block_spans([block(0, None)])
    assert s.is_indefinite
    (s,) = merge_block_spans([block(0, None), unblock(50)])
    assert not s.is_indefinite or s.effective_end == 50
    assert s.effective_end == 50


def test_merge_rejects_bad_input():
    with pytest.raises(ValueError):
        merge_block_spans([block(10, 5), block(0, 5)])
    with pytest.raises(ValueError):
        merge_block_spans([block(0, 5, target="x"), block(1, 5, target="y")])


def _effective(spans):
    return [(s.start, RASTER_END if s.effective_end == float("inf") else s.effective_end)
            for s in spans]


def test_rasterization_oracle_random_logs():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        log = random_block_log(rng)
        spans = merge_block_spans(log)
        assert _effective(spans) == rasterize_spans(log)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_span_invariants(seed):
    rng = np.random.default_rng(seed)
    spans = merge_block_spans(random_block_log(rng))
    for s in spans:
        assert s.start < s.effective_end <= s.original_end
        assert s.reduction >= 0
        assert s.reduced_early == (s.reduction > 0)
    for a, b in zip(spans, spans[1:]):
        assert a.effective_end <= b.start


def test_build_spans_groups_targets():
    entries = [block(0, 5, "x"), block(1, 5, "y"), unblock(2, "x"), block(10, 5, "x")]
    spans = build_spans(entries)
    assert sorted(spans) == ["x", "y"]
    assert [(s.start, s.effective_end) for s in spans["x"]] == [(0, 2), (10, 15)]


# ---------------------------------------------------------------------------
# comments


def ev(i, author, owner, ts, kind=PageKind.USER, action=CommentAction.ADD, text="hi"):
    return CommentEvent(f"c{i}", author, owner, kind, ts, action, text)


def test_comment_index_counts():
    idx = CommentIndex.from_events([ev(1, "a", "p", 1), ev(2, "a", "q", 2), ev(3, "a", "p", 3)])
    assert len(idx.by_author) == 1
    assert len(idx.by_owner) == 2
    assert load_comments(b"").events == []


def test_duplicate_id_rejected():
    with pytest.raises(DuplicateId):
        CommentIndex.from_events([ev(1, "a", "p", 1), ev(1, "b", "p", 2)])


def test_empty_text_only_on_delete():
    rec = ev(1, "a", "p", 1, text="").to_record()
    with pytest.raises(MalformedRecord):
        load_comments(json.dumps(rec), strict=True)
    rec["action"] = "delete"
    assert len(load_comments(json.dumps(rec), strict=True)) == 1


def test_comment_index_matches_naive_grouping():
    rng = np.random.default_rng(3)
    users = [f"u{i}" for i in range(40)]
    events = []
    for i in range(10_000):
        kind = PageKind.USER if rng.random() < 0.7 else PageKind.ARTICLE
        owner = users[rng.integers(40)] if kind is PageKind.USER else f"art{rng.integers(30)}"
        events.append(ev(i, users[rng.integers(40)], owner, int(rng.integers(0, 10**6)), kind))
    text = serialize_comments(events[::-1])
    idx = load_comments(text, strict=True)

    by_author, by_owner = defaultdict(list), defaultdict(list)
    for e in events:
        by_author[e.author].append(e)
        by_owner[e.page_kind, e.owner].append(e)
    for u, lst in by_author.items():
        assert idx.authored(u) == sorted(lst, key=lambda e: (e.timestamp, e.id))
    for key, lst in by_owner.items():
        assert idx.by_owner[key] == sorted(lst, key=lambda e: (e.timestamp, e.id))
    for u in users:
        naive = [e for e in by_owner[PageKind.USER, u] if e.author != u]
        assert idx.received(u) == sorted(naive, key=lambda e: (e.timestamp, e.id))
