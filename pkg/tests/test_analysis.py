from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import pytest
import scipy.special
import scipy.stats

from seqteach import analysis, schedule, vocab


@pytest.fixture(scope="module")
def neighbor_vocab(english_like_inventory):
    inv = english_like_inventory

    def item(word, phonemes, weights=None):
        return vocab.build_item(word, phonemes.split(), inv, weights=weights or {})

    items = (
        item("cat", "k @ t", {"freq": 6.0}),
        item("bat", "b @ t"),
        item("sat", "s @ t"),
        item("cot", "k o t"),
        item("cats", "k @ t s"),
        item("cal", "k o l", {"freq": 2.0}),  # vowel letter a read as o
        item("ta", "t @"),
    )
    return vocab.Vocabulary(items, inv)


# ----------------------------------------------------------------------
# Edit distance and neighborhoods

def test_levenshtein_basics():
    assert analysis.levenshtein("", "") == 0
    assert analysis.levenshtein("abc", "abc") == 0
    assert analysis.levenshtein("", "abc") == 3
    assert analysis.levenshtein("kitten", "sitting") == 3
    assert analysis.levenshtein("cat", "cats") == 1
    assert analysis.levenshtein("cat", "ta") == 2


def test_levenshtein_against_recursive_reference():
    @lru_cache(maxsize=None)
    def ref(a, b):
        if not a or not b:
            return len(a) + len(b)
        return min(
            ref(a[1:], b) + 1,
            ref(a, b[1:]) + 1,
            ref(a[1:], b[1:]) + (a[0] != b[0]),
        )

    rng = np.random.default_rng(23)
    letters = "abc"
    for _ in range(200):
        a = "".join(rng.choice(list(letters), rng.integers(0, 6)))
        b = "".join(rng.choice(list(letters), rng.integers(0, 6)))
        assert analysis.levenshtein(a, b) == ref(a, b)
        assert analysis.levenshtein(a, b) == analysis.levenshtein(b, a)


def test_orthographic_neighbors(neighbor_vocab):
    # cat: bat, sat, cot, cal by substitution and cats by insertion
    assert analysis.orthographic_neighbors(neighbor_vocab, "cat") == 5
    assert analysis.orthographic_neighbors(neighbor_vocab, "ta") == 0
    assert analysis.orthographic_neighbors(neighbor_vocab, "cats") == 1
    with pytest.raises(vocab.VocabError):
        analysis.orthographic_neighbors(neighbor_vocab, "dog")


def test_phonological_neighbors(neighbor_vocab):
    # needs the -at body with the same @ t pronunciation
    assert analysis.phonological_neighbors(neighbor_vocab, "cat") == 2
    assert analysis.phonological_neighbors(neighbor_vocab, "bat") == 2
    assert analysis.phonological_neighbors(neighbor_vocab, "cot") == 0
    assert analysis.phonological_neighbors(neighbor_vocab, "cal") == 0


def test_phonological_density_counts_target_bits(neighbor_vocab):
    # every inventory phoneme here carries three feature bits
    assert analysis.phonological_density(neighbor_vocab.find("cat")) == 9
    assert analysis.phonological_density(neighbor_vocab.find("cats")) == 12
    assert analysis.phonological_density(neighbor_vocab.find("ta")) == 6


# ----------------------------------------------------------------------
# Pronunciation entropy

def test_unit_entropy_vowel(neighbor_vocab):
    ent = analysis.unit_entropy(neighbor_vocab, "vowel")
    # grapheme a: @ in five words, o in one (cal)
    h = -(5 / 6) * math.log2(5 / 6) - (1 / 6) * math.log2(1 / 6)
    for w in ("cat", "bat", "sat", "cats", "cal", "ta"):
        assert ent[w] == pytest.approx(h)
    assert ent["cot"] == 0.0


def test_unit_entropy_oncleus_and_rime(neighbor_vocab):
    onc = analysis.unit_entropy(neighbor_vocab, "oncleus")
    # spelling unit "ca" covers cat, cats ("k @") and cal ("k o")
    h = -(2 / 3) * math.log2(2 / 3) - (1 / 3) * math.log2(1 / 3)
    assert onc["cat"] == pytest.approx(h)
    assert onc["cats"] == pytest.approx(h)
    assert onc["cal"] == pytest.approx(h)
    assert onc["bat"] == 0.0
    rime = analysis.unit_entropy(neighbor_vocab, "rime")
    # "at" is always "@ t" here, "ats" and "al" are unique
    for w in ("cat", "bat", "sat", "cats", "cal"):
        assert rime[w] == 0.0


def test_unit_entropy_weighted(neighbor_vocab):
    ent = analysis.unit_entropy(neighbor_vocab, "vowel", weight_column="freq")
    # only cat (6) and cal (2) carry freq, so the a-grapheme split is 3:1
    h = -(0.75) * math.log2(0.75) - 0.25 * math.log2(0.25)
    assert ent["cat"] == pytest.approx(h)
    assert ent["cal"] == pytest.approx(h)


def test_unit_entropy_rejects_unknown_unit(neighbor_vocab):
    with pytest.raises(ValueError, match="unit"):
        analysis.unit_entropy(neighbor_vocab, "coda")


# ----------------------------------------------------------------------
# Statistics against an independent implementation

def test_spearman_matches_scipy():
    rng = np.random.default_rng(41)
    for n in (3, 5, 12, 60):
        for _ in range(20):
            x = rng.standard_normal(n)
            y = 0.5 * x + rng.standard_normal(n)
            rho, p = analysis.spearman_rho(x, y)
            want = scipy.stats.spearmanr(x, y)
            assert rho == pytest.approx(want.statistic, abs=1e-6)
            assert p == pytest.approx(want.pvalue, abs=1e-6)


def test_spearman_matches_scipy_with_ties():
    rng = np.random.default_rng(42)
    for n in (6, 15, 40):
        for _ in range(20):
            x = rng.integers(0, 4, n).astype(float)
            y = rng.integers(0, 3, n).astype(float)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            rho, p = analysis.spearman_rho(x, y)
            want = scipy.stats.spearmanr(x, y)
            assert rho == pytest.approx(want.statistic, abs=1e-6)
            assert p == pytest.approx(want.pvalue, abs=1e-6)


def test_spearman_perfect_monotone():
    x = np.array([1.0, 2.0, 5.0, 9.0])
    rho, p = analysis.spearman_rho(x, x**3)
    assert (rho, p) == (1.0, 0.0)
    rho, p = analysis.spearman_rho(x, -x)
    assert (rho, p) == (-1.0, 0.0)


def test_spearman_is_invariant_under_monotone_transforms():
    rng = np.random.default_rng(43)
    x = rng.standard_normal(30)
    y = rng.standard_normal(30)
    base = analysis.spearman_rho(x, y)
    assert analysis.spearman_rho(np.exp(x), y**3) == base


def test_spearman_input_validation():
    with pytest.raises(ValueError):
        analysis.spearman_rho([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        analysis.spearman_rho([1.0, 2.0, 3.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="zero variance"):
        analysis.spearman_rho([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_welch_t_matches_scipy():
    rng = np.random.default_rng(44)
    for nx, ny in ((2, 2), (5, 9), (30, 12), (50, 50)):
        for _ in range(20):
            x = rng.standard_normal(nx) * 2.0
            y = rng.standard_normal(ny) + 0.3
            t, p = analysis.two_sample_t_test(x, y)
            want = scipy.stats.ttest_ind(x, y, equal_var=False)
            assert t == pytest.approx(want.statistic, abs=1e-6)
            assert p == pytest.approx(want.pvalue, abs=1e-6)


def test_welch_t_degenerate_samples():
    assert analysis.two_sample_t_test([2.0, 2.0], [2.0, 2.0]) == (0.0, 1.0)
    with pytest.raises(ValueError):
        analysis.two_sample_t_test([2.0, 2.0], [3.0, 3.0])
    with pytest.raises(ValueError):
        analysis.two_sample_t_test([1.0], [1.0, 2.0])


def test_betainc_matches_scipy_on_grid():
    for a in (0.5, 1.0, 2.5, 17.0, 60.0):
        for b in (0.5, 1.0, 4.0, 29.5):
            for x in np.linspace(0.0, 1.0, 21):
                ours = analysis._betainc(a, b, float(x))
                want = float(scipy.special.betainc(a, b, x))
                assert ours == pytest.approx(want, abs=1e-9)


# ----------------------------------------------------------------------
# The variable table and its correlations

def test_word_variables_table(neighbor_vocab):
    table = {v.word: v for v in analysis.word_variables(neighbor_vocab)}
    cat = table["cat"]
    assert cat.orth_length == 3 and cat.phon_length == 3
    assert cat.orth_neighbors == 5 and cat.phon_neighbors == 2
    assert cat.phon_density == 9
    assert cat.extra == {"freq": 6.0}
    assert cat.value("orth_length") == 3
    assert cat.value("freq") == 6.0
    assert table["bat"].extra == {}


def _length_graded_vocab(english_like_inventory):
    inv = english_like_inventory
    items = (
        vocab.build_item("ta", "t @".split(), inv),
        vocab.build_item("cat", "k @ t".split(), inv),
        vocab.build_item("cats", "k @ t s".split(), inv),
        vocab.build_item("stats", "s t @ t s".split(), inv),
    )
    return vocab.Vocabulary(items, inv)


def test_correlation_with_length_proportional_mass(english_like_inventory):
    v = _length_graded_vocab(english_like_inventory)
    pool = vocab.PoolSplit(np.arange(4), np.arange(0))
    lengths = np.array([2.0, 3.0, 4.0, 5.0])
    P = schedule.Multinomial(lengths / lengths.sum())
    rows = {r.variable: r for r in analysis.correlate_with_mean_pq(v, pool, P, P)}
    assert rows["orth_length"].rho == 1.0
    assert rows["orth_length"].p_value == 0.0
    assert rows["phon_length"].rho == 1.0


def test_correlation_undefined_for_uniform_target(english_like_inventory):
    v = _length_graded_vocab(english_like_inventory)
    pool = vocab.PoolSplit(np.arange(4), np.arange(0))
    U = schedule.uniform_multinomial(4)
    rows = analysis.correlate_with_mean_pq(v, pool, U, U)
    assert all(r.rho is None for r in rows)
    assert all(r.note == "undefined: constant ranking" for r in rows)


def test_correlation_skips_partial_weight_columns(neighbor_vocab):
    pool = vocab.PoolSplit(np.arange(len(neighbor_vocab)), np.arange(0))
    lengths = np.array([float(len(it.word)) for it in neighbor_vocab.items])
    P = schedule.Multinomial(lengths / lengths.sum())
    rows = {r.variable: r for r in analysis.correlate_with_mean_pq(neighbor_vocab, pool, P, P)}
    assert rows["freq"].rho is None
    assert rows["freq"].note == "skipped: missing for 5 pool words"


def test_correlation_rejects_mismatched_pool(english_like_inventory):
    v = _length_graded_vocab(english_like_inventory)
    pool = vocab.PoolSplit(np.arange(4), np.arange(0))
    U = schedule.uniform_multinomial(3)
    with pytest.raises(ValueError):
        analysis.correlate_with_mean_pq(v, pool, U, U)


def test_correlations_csv_format():
    rows = [
        analysis.CorrelationRow("orth_length", 0.52, 0.001),
        analysis.CorrelationRow("vowel_entropy", -0.1, 0.4),
        analysis.CorrelationRow("freq", None, None, "skipped: missing for 2 pool words"),
    ]
    text = analysis.correlations_to_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == "variable,rho,p_value,significant_05,note"
    assert lines[1] == "orth_length,0.52,0.001,*,"
    assert lines[2] == "vowel_entropy,-0.1,0.4,,"
    assert lines[3] == "freq,undefined,undefined,,skipped: missing for 2 pool words"
