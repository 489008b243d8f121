"""Small statistics kit: 2x2 chi-squared, Wilson intervals, mosaics,
informative-Dirichlet log-odds and the exact McNemar test."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Mapping, Sequence

from .errors import DegenerateTable, EmptyCorpus, EmptySample, ZeroExpectedCount

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x)``.

    Power series for ``x < a + 1``, Lentz continued fraction otherwise.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    log_prefactor = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1:
        term = total = 1.0 / a
        n = 0
        while abs(term) > abs(total) * _EPS:
            n += 1
            term *= x / (a + n)
            total += term
            if n > _MAX_ITER:
                raise ArithmeticError("incomplete gamma series did not converge")
        return max(0.0, 1.0 - total * math.exp(log_prefactor))
    # continued fraction for Q
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError("incomplete gamma fraction did not converge")
    return math.exp(log_prefactor) * h


def chi2_sf(x: float, dof: int) -> float:
    """Survival function of the chi-squared distribution."""
    if x <= 0:
        return 1.0
    return gammaincc(dof / 2.0, x / 2.0)


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Rows: cue present / absent. Columns: recidivist / reformed."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("cell counts must be non-negative")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    def transpose(self) -> "ContingencyTable2x2":
        return ContingencyTable2x2(self.a, self.c, self.b, self.d)

    @classmethod
    def from_flags(cls, rows: Iterable[bool], cols: Iterable[bool]):
        counts = Counter(zip(rows, cols))
        return cls(
            counts[True, True], counts[True, False],
            counts[False, True], counts[False, False],
        )


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    dof: int


def chi_squared_2x2(t: ContingencyTable2x2, yates: bool = False) -> TestResult:
    """Pearson chi-squared test of independence for a 2x2 table.

    No continuity correction unless ``yates`` is set.
    """
    if t.n == 0:
        raise ZeroExpectedCount("empty table")
    rows = (t.a + t.b, t.c + t.d)
    cols = (t.a + t.c, t.b + t.d)
    if 0 in rows or 0 in cols:
        raise DegenerateTable(f"a margin is zero: rows={rows} cols={cols}")
    observed = ((t.a, t.b), (t.c, t.d))
    stat = 0.0
    for i in range(2):
        for j in range(2):
            expected = rows[i] * cols[j] / t.n
            diff = abs(observed[i][j] - expected)
            if yates:
                diff = max(0.0, diff - 0.5)
            stat += diff * diff / expected
    return TestResult(stat, chi2_sf(stat, 1), 1)


def z_for_level(level: float) -> float:
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def wilson_ci(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clamped to [0, 1]."""
    if n <= 0:
        raise EmptySample("n must be positive")
    if not 0 <= successes <= n:
        raise ValueError("successes must lie in [0, n]")
    z = z_for_level(level)
    phat = successes / n
    z2n = z * z / n
    centre = (phat + z2n / 2.0) / (1.0 + z2n)
    half = z / (1.0 + z2n) * math.sqrt(phat * (1.0 - phat) / n + z2n / (4.0 * n))
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


# ---------------------------------------------------------------------------
# mosaics


@dataclass(frozen=True)
class MosaicResult:
    cue: str
    table: ContingencyTable2x2
    test: TestResult

    @property
    def present_recid_ratio(self) -> float:
        return self.table.a / (self.table.a + self.table.b)

    @property
    def absent_recid_ratio(self) -> float:
        return self.table.c / (self.table.c + self.table.d)

    def rows(self) -> list[tuple]:
        """``(cue, group, recid_ratio, reform_ratio, n)`` for each group."""
        t = self.table
        out = []
        for group, recid, reform in (("present", t.a, t.b), ("absent", t.c, t.d)):
            n = recid + reform
            out.append((self.cue, group, recid / n, reform / n, n))
        return out


def mosaic_table(
    outcome: Mapping[str, bool], present: Mapping[str, bool], cue: str
) -> MosaicResult:
    """Column-normalised 2x2 of outcome (True = recidivist) by cue presence.

    Only users present in both mappings are counted.
    """
    users = sorted(set(outcome) & set(present))
    table = ContingencyTable2x2.from_flags(
        (bool(present[u]) for u in users), (bool(outcome[u]) for u in users)
    )
    return MosaicResult(cue, table, chi_squared_2x2(table))


# ---------------------------------------------------------------------------
# fightin' words


@dataclass(frozen=True)
class LogOddsResult:
    word: str
    z: float
    count_a: int
    count_b: int


def _as_counter(bag) -> Counter:
    if isinstance(bag, Mapping):
        return Counter({w: int(c) for w, c in bag.items() if c})
    return Counter(bag)


def fightin_words(tokens_a, tokens_b, alpha0: float = 500.0) -> list[LogOddsResult]:
    """Weighted log-odds ratio with an informative Dirichlet prior.

    The prior for each word is ``alpha0`` times its pooled frequency in both
    corpora. Positive z means the word leans towards corpus A. Results are
    sorted by z, largest first, ties by word.
    """
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")
    ya, yb = _as_counter(tokens_a), _as_counter(tokens_b)
    na, nb = sum(ya.values()), sum(yb.values())
    if na == 0 or nb == 0:
        raise EmptyCorpus("both corpora must contain tokens")
    pooled = na + nb
    out = []
    for word in set(ya) | set(yb):
        a_w, b_w = ya[word], yb[word]
        alpha_w = alpha0 * (a_w + b_w) / pooled
        den_a = na + alpha0 - a_w - alpha_w
        den_b = nb + alpha0 - b_w - alpha_w
        if den_a <= 0 or den_b <= 0:
            # single-word vocabulary: nothing to contrast
            z = 0.0
        else:
            delta = math.log((a_w + alpha_w) / den_a) - math.log((b_w + alpha_w) / den_b)
            var = 1.0 / (a_w + alpha_w) + 1.0 / (b_w + alpha_w)
            z = delta / math.sqrt(var)
        out.append(LogOddsResult(word, z, a_w, b_w))
    out.sort(key=lambda r: (-r.z, r.word))
    return out


# ---------------------------------------------------------------------------
# mcnemar


def mcnemar_exact(correct_a: Sequence[bool], correct_b: Sequence[bool]) -> TestResult:
    """Two-sided exact McNemar test on paired correctness vectors.

    ``statistic`` holds the usual McNemar chi-square for reference; the
    p-value is the exact binomial tail over the discordant pairs.
    """
    if len(correct_a) != len(correct_b):
        raise ValueError("prediction vectors must have equal length")
    b = sum(1 for x, y in zip(correct_a, correct_b) if x and not y)
    c = sum(1 for x, y in zip(correct_a, correct_b) if y and not x)
    n = b + c
    if n == 0:
        return TestResult(0.0, 1.0, 1)
    k = min(b, c)
    tail = sum(math.comb(n, i) for i in range(k + 1)) / (1 << n)
    return TestResult((b - c) ** 2 / n, min(1.0, 2.0 * tail), 1)
