"""Word-level structure measures and the statistics behind the reports.

These operations quantify what makes a word easy or hard to learn
(neighborhood sizes, feature density, spelling-to-sound entropy) and
correlate those variables with the probability mass an optimized
schedule assigns to each word. The statistical primitives are
implemented here directly so the package has no runtime dependency on
a statistics library; the test suite cross-checks them against an
independent implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schedule import Multinomial
from .vocab import PAD, PoolSplit, Vocabulary, WordItem


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def orthographic_neighbors(vocab: Vocabulary, word: str) -> int:
    """Number of other words at edit distance exactly 1."""
    vocab.find(word)
    count = 0
    for it in vocab.items:
        if it.word == word or abs(len(it.word) - len(word)) > 1:
            continue
        if levenshtein(it.word, word) == 1:
            count += 1
    return count


def _phon_rime(item: WordItem) -> tuple[str, ...]:
    return tuple(c for c in item.aligned_phon[3:] if c != PAD)


def phonological_neighbors(vocab: Vocabulary, word: str) -> int:
    """Words sharing both the orthographic body and the phonological
    rime. Body = vowel grapheme + coda spelling; rime = vowel phoneme +
    coda phonemes."""
    me = vocab.find(word)
    body, rime = me.vowel + me.coda, _phon_rime(me)
    count = 0
    for it in vocab.items:
        if it.word == word:
            continue
        if it.vowel + it.coda == body and _phon_rime(it) == rime:
            count += 1
    return count


def phonological_density(item: WordItem) -> int:
    """Number of set bits in the 200-dim phonological target."""
    return int(item.y.sum())


VALID_UNITS = ("oncleus", "vowel", "rime")


def _unit_strings(item: WordItem, unit: str) -> tuple[str, str]:
    """(orthographic unit, phonological realization) for one word."""
    if unit == "oncleus":
        orth = item.onset + item.vowel
        phon = item.aligned_phon[:4]
    elif unit == "vowel":
        orth = item.vowel
        phon = item.aligned_phon[3:4]
    elif unit == "rime":
        orth = item.vowel + item.coda
        phon = item.aligned_phon[3:]
    else:
        raise ValueError(f"unit must be one of {VALID_UNITS}, got {unit!r}")
    return orth, " ".join(c for c in phon if c != PAD)


def unit_entropy(
    vocab: Vocabulary, unit: str, weight_column: str | None = None
) -> dict[str, float]:
    """Shannon entropy (bits) of each word's spelling-unit pronunciation.

    Words are grouped by the orthographic unit string; within a group
    the distribution over phonological realizations is type-based (one
    count per word) unless weight_column names a frequency column, in
    which case realizations are weighted by it.
    """
    groups: dict[str, dict[str, float]] = {}
    for it in vocab.items:
        orth, phon = _unit_strings(it, unit)
        w = 1.0 if weight_column is None else it.weights.get(weight_column, 0.0)
        groups.setdefault(orth, {})
        groups[orth][phon] = groups[orth].get(phon, 0.0) + w
    entropy: dict[str, float] = {}
    for orth, realizations in groups.items():
        total = sum(realizations.values())
        h = 0.0
        if total > 0:
            for c in realizations.values():
                if c > 0:
                    p = c / total
                    h -= p * math.log2(p)
        entropy[orth] = h
    return {it.word: entropy[_unit_strings(it, unit)[0]] for it in vocab.items}


# ----------------------------------------------------------------------
# Statistics

def _average_ranks(xs: np.ndarray) -> np.ndarray:
    """Ranks starting at 1; ties share the average of their positions."""
    order = np.argsort(xs, kind="stable")
    ranks = np.empty(len(xs))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc, yc = x - x.mean(), y - y.mean()
    vx, vy = (xc**2).sum(), (yc**2).sum()
    if vx == 0.0 or vy == 0.0:
        raise ValueError("zero variance")
    return float((xc * yc).sum() / math.sqrt(vx * vy))


def spearman_rho(xs, ys) -> tuple[float, float]:
    """Spearman correlation with average ranks and a t-approximation
    two-sided p-value."""
    x, y = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 observations")
    rho = _pearson(_average_ranks(x), _average_ranks(y))
    rho = max(-1.0, min(1.0, rho))
    if 1.0 - rho * rho < 1e-15:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, _t_two_sided_p(t, n - 2)


def two_sample_t_test(xs, ys) -> tuple[float, float]:
    """Welch's t-test with Welch-Satterthwaite degrees of freedom."""
    x, y = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    nx, ny = len(x), len(y)
    if nx < 2 or ny < 2:
        raise ValueError("need at least 2 observations per sample")
    vx, vy = x.var(ddof=1), y.var(ddof=1)
    sx, sy = vx / nx, vy / ny
    se2 = sx + sy
    if se2 == 0.0:
        if x.mean() == y.mean():
            return 0.0, 1.0
        raise ValueError("zero variance in both samples with unequal means")
    t = (x.mean() - y.mean()) / math.sqrt(se2)
    df = se2**2 / (sx**2 / (nx - 1) + sy**2 / (ny - 1))
    return float(t), _t_two_sided_p(t, df)


def _t_two_sided_p(t: float, df: float) -> float:
    """Two-sided p-value from the t-distribution, via the identity
    p = I_x(df/2, 1/2) with x = df/(df + t^2)."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return _betainc(df / 2.0, 0.5, x)


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Continued-fraction evaluation (modified Lentz), switched at the
    symmetry point for convergence. Absolute accuracy around 1e-10.
    """
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _beta_cf(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            break
    return h


# ----------------------------------------------------------------------
# The per-word variable table and its correlations

STRUCTURAL_VARIABLES = (
    "orth_length",
    "phon_length",
    "orth_neighbors",
    "phon_neighbors",
    "phon_density",
    "oncleus_entropy",
    "vowel_entropy",
    "rime_entropy",
)


@dataclass(frozen=True)
class WordVariables:
    word: str
    orth_length: int
    phon_length: int
    orth_neighbors: int
    phon_neighbors: int
    phon_density: int
    oncleus_entropy: float
    vowel_entropy: float
    rime_entropy: float
    extra: dict[str, float]

    def value(self, name: str) -> float:
        if name in self.extra:
            return self.extra[name]
        return getattr(self, name)


@dataclass(frozen=True)
class CorrelationRow:
    variable: str
    rho: float | None
    p_value: float | None
    note: str = ""


def word_variables(vocab: Vocabulary) -> list[WordVariables]:
    """Structural variables for every word, plus pass-through weights."""
    ent = {u: unit_entropy(vocab, u) for u in VALID_UNITS}
    out = []
    for it in vocab.items:
        out.append(
            WordVariables(
                word=it.word,
                orth_length=len(it.word),
                phon_length=sum(1 for c in it.aligned_phon if c != PAD),
                orth_neighbors=orthographic_neighbors(vocab, it.word),
                phon_neighbors=phonological_neighbors(vocab, it.word),
                phon_density=phonological_density(it),
                oncleus_entropy=ent["oncleus"][it.word],
                vowel_entropy=ent["vowel"][it.word],
                rime_entropy=ent["rime"][it.word],
                extra=dict(it.weights),
            )
        )
    return out


def correlate_with_mean_pq(
    vocab: Vocabulary,
    pool: PoolSplit,
    P: Multinomial,
    Q: Multinomial,
) -> list[CorrelationRow]:
    """Spearman correlation of each word variable against the mean
    schedule mass (P_i + Q_i)/2 over the pool words.

    Pass-through columns missing from some pool word are skipped with
    a note rather than raising; a constant variable or constant target
    yields an "undefined" row.
    """
    if P.K != pool.K or Q.K != pool.K:
        raise ValueError("P and Q must be distributions over the pool")
    all_vars = word_variables(vocab)
    pool_vars = [all_vars[int(i)] for i in pool.pool_indices]
    target = (P.probs + Q.probs) / 2.0

    names = list(STRUCTURAL_VARIABLES)
    extras: list[str] = []
    for v in pool_vars:
        for k in v.extra:
            if k not in extras:
                extras.append(k)

    rows: list[CorrelationRow] = []
    for name in names + extras:
        if name in extras:
            missing = sum(1 for v in pool_vars if name not in v.extra)
            if missing:
                rows.append(
                    CorrelationRow(name, None, None, f"skipped: missing for {missing} pool words")
                )
                continue
        values = np.array([v.value(name) for v in pool_vars], dtype=np.float64)
        try:
            rho, p = spearman_rho(values, target)
            rows.append(CorrelationRow(name, rho, p))
        except ValueError:
            rows.append(CorrelationRow(name, None, None, "undefined: constant ranking"))
    return rows


def correlations_to_csv(rows: list[CorrelationRow]) -> str:
    lines = ["variable,rho,p_value,significant_05,note"]
    for r in rows:
        if r.rho is None:
            lines.append(f"{r.variable},undefined,undefined,,{r.note}")
        else:
            flag = "*" if r.p_value < 0.05 else ""
            lines.append(f"{r.variable},{r.rho!r},{r.p_value!r},{flag},{r.note}")
    return "\n".join(lines) + "\n"
