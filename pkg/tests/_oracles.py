"""Independent reference implementations and fixtures used by several test files.

Nothing here imports the code under test beyond plain data types, so a
shared mistake would have to be made twice.
"""

import math

import numpy as np

from modtraj.ingest import Action, BlockLogEntry

# ---------------------------------------------------------------------------
# block spans

RASTER_END = 10_000  # stands in for "indefinite" on the small test timelines


def random_block_log(rng, target="u", n=None, t_max=300, d_max=60, p_indef=0.05):
    """A random time-sorted log for one target on a small integer timeline."""
    n = int(rng.integers(1, 12)) if n is None else n
    times = np.sort(rng.integers(0, t_max, n))
    out = []
    for t in times:
        u = rng.random()
        if u < 0.55:
            action = Action.BLOCK
        elif u < 0.75:
            action = Action.MODIFY
        else:
            action = Action.UNBLOCK
        if action is Action.UNBLOCK:
            dur = None
        elif rng.random() < p_indef:
            dur = None
        else:
            dur = int(rng.integers(1, d_max))
        out.append(BlockLogEntry(int(t), "adm", target, action, dur, "edit warring"))
    return out


def rasterize_spans(entries, horizon=RASTER_END):
    """Maximal blocked runs ``[(start, end)]`` from a per-second timeline.

    Each entry paints the boolean timeline directly: a block sets its
    interval, a modify on a blocked second clears from there on and
    repaints, an unblock on a blocked second clears from there on.
    """
    blocked = np.zeros(horizon + 1, dtype=bool)
    for e in entries:
        t = e.timestamp
        end = horizon if e.duration is None else min(horizon, t + e.duration)
        if e.action is Action.BLOCK:
            blocked[t:end] = True
        elif e.action is Action.MODIFY:
            if blocked[t]:
                blocked[t:] = False
                blocked[t:end] = True
        else:
            if blocked[t]:
                blocked[t:] = False
    runs = []
    i = 0
    while i <= horizon:
        if blocked[i]:
            j = i
            while j <= horizon and blocked[j]:
                j += 1
            runs.append((i, j))
            i = j
        else:
            i += 1
    return runs


# ---------------------------------------------------------------------------
# statistics fixtures

CHI_TABLES = [
    (10, 10, 10, 10),
    (10, 20, 30, 40),
    (50, 1, 1, 50),
    (3, 7, 9, 2),
    (100, 80, 60, 90),
    (1, 1, 1, 2),
    (12, 5, 7, 30),
    (200, 300, 250, 260),
    (5, 5, 50, 5),
    (9, 31, 44, 16),
    (17, 17, 3, 40),
    (2, 98, 10, 90),
    (60, 40, 40, 60),
    (1, 100, 100, 1),
    (33, 12, 21, 8),
    (7, 7, 8, 6),
    (400, 20, 380, 40),
    (25, 75, 30, 70),
    (4, 1, 1, 4),
    (1000, 990, 1010, 1000),
]

WILSON_CASES = [
    (0, 10, 0.95), (1, 10, 0.95), (5, 10, 0.95), (9, 10, 0.95), (10, 10, 0.95),
    (0, 1, 0.95), (1, 1, 0.95), (17, 50, 0.95), (250, 1000, 0.95), (999, 1000, 0.95),
    (3, 7, 0.90), (3, 7, 0.99), (45, 100, 0.80), (1, 2, 0.95), (60, 200, 0.95),
    (123, 456, 0.95), (0, 100, 0.99), (100, 100, 0.99), (2, 3, 0.5), (6026, 20000, 0.95),
]


def closed_form_chi2(a, b, c, d):
    n = a + b + c + d
    return n * (a * d - b * c) ** 2 / ((a + b) * (c + d) * (a + c) * (b + d))


def wilson_alternate(k, n, z):
    """The textbook ``(2np + z^2 +- z sqrt(z^2 + 4np(1-p))) / (2(n + z^2))`` form."""
    p = k / n
    root = z * math.sqrt(z * z + 4 * n * p * (1 - p))
    lo = (2 * n * p + z * z - root) / (2 * (n + z * z))
    hi = (2 * n * p + z * z + root) / (2 * (n + z * z))
    return lo, hi


FW_CORPUS_A = (
    "i apologize for the edit war and i am sorry that the page was locked "
    "i will discuss changes on the talk page before editing again sorry"
).split()
FW_CORPUS_B = (
    "why was i blocked this block is unfair and i was wrongly accused "
    "of edit warring on the page why not block the other editor too"
).split()


def fightin_words_transliteration(a_tokens, b_tokens, alpha0):
    """Direct vectorised evaluation of the informative-prior log-odds z."""
    vocab = sorted(set(a_tokens) | set(b_tokens))
    ya = np.array([a_tokens.count(w) for w in vocab], dtype=float)
    yb = np.array([b_tokens.count(w) for w in vocab], dtype=float)
    na, nb = ya.sum(), yb.sum()
    alpha = alpha0 * (ya + yb) / (na + nb)
    delta = np.log((ya + alpha) / (na + alpha0 - ya - alpha)) - np.log(
        (yb + alpha) / (nb + alpha0 - yb - alpha)
    )
    sigma = np.sqrt(1.0 / (ya + alpha) + 1.0 / (yb + alpha))
    return dict(zip(vocab, delta / sigma))


# ---------------------------------------------------------------------------
# lexical fixtures: example in-block appeals, one (cue, message) row each

APPEAL_EXAMPLES = [
    ("apology", "It is true that the tag-war got out of hand. I apologize if it caused any disruption."),
    ("apology", "I am deeply sorry for not understanding the whole situation, and ask for your forgiveness."),
    ("apology", "Given the recent history on the article, forgive me if claims of lawyers are met with skepticism."),
    ("direct_question", "Why was I blocked, when I had not the right, but rather the duty to remove BLP inaccuracies?"),
    ("direct_question", "So what policy, precisely have I violated?"),
    ("direct_question", "How is it this person won't leave me alone and I repeatedly ask to be left alone and I get blocked?"),
    ("unfairness", "this block is unjustified. none of the changes were in violation of the 3rr rule."),
    ("unfairness", "i have alerted another administrator about your blatent and unwarranted abuse of power."),
    ("unfairness", "iv been wrongly accused of making up information"),
]


# ---------------------------------------------------------------------------
# matching oracles


def greedy_departure_oracle(departers, stayers, tol):
    """Re-sort and re-match from scratch with plain lists (quadratic)."""
    free = dict(stayers)
    pairs = []
    for user in sorted(departers, key=lambda u: (departers[u], u)):
        day = departers[user]
        best = None
        for cand in sorted(free):
            if cand == user:
                continue
            diff = abs(free[cand] - day)
            if diff <= tol * abs(day) and (best is None or (diff, cand) < best):
                best = (diff, cand)
        if best is not None:
            pairs.append((user, best[1], best[0]))
            del free[best[1]]
    return pairs


def greedy_recid_oracle(recidivists, reformed):
    free = dict(reformed)
    pairs = []
    for user in sorted(recidivists, key=lambda u: (recidivists[u], u)):
        a = recidivists[user]
        ok = [(c, u) for u, c in free.items() if c >= a and u != user]
        if ok:
            c, right = min(ok)
            pairs.append((user, right, a))
            del free[right]
    return pairs
