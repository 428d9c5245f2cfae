from __future__ import annotations

import numpy as np
import pytest

from seqteach import vocab
from seqteach.vocab import VocabError

from conftest import small_inventory


# ----------------------------------------------------------------------
# Slot alignment

def test_align_multiletter_word(english_like_inventory):
    orth, phon = vocab.align_word("coals", ["k", "o", "l", "z"], english_like_inventory)
    assert orth == "__coals___"
    assert phon == ("_", "_", "k", "o", "l", "z", "_", "_")


def test_align_cvc_word(english_like_inventory):
    orth, phon = vocab.align_word("cat", ["k", "@", "t"], english_like_inventory)
    assert orth == "__ca_t____"
    assert phon == ("_", "_", "k", "@", "t", "_", "_", "_")


def test_align_explicit_segmentation_matches_heuristic(english_like_inventory):
    auto = vocab.align_word("coals", ["k", "o", "l", "z"], english_like_inventory)
    explicit = vocab.align_word(
        "coals", ["k", "o", "l", "z"], english_like_inventory, ("c", "oa", "ls")
    )
    assert auto == explicit


def test_align_rejects_segmentation_that_respells(english_like_inventory):
    with pytest.raises(VocabError):
        vocab.align_word("coals", ["k", "o", "l", "z"], english_like_inventory, ("c", "oa", "l"))


def test_align_rejects_empty_vowel_segment(english_like_inventory):
    with pytest.raises(VocabError):
        vocab.align_word("bolt", ["b", "o", "l", "t"], english_like_inventory, ("bo", "", "lt"))


def test_align_rejects_overlong_onset(english_like_inventory):
    with pytest.raises(VocabError):
        vocab.align_word(
            "bbbbat", ["b", "@", "t"], english_like_inventory, ("bbbb", "a", "t")
        )


def test_align_rejects_overlong_coda(english_like_inventory):
    with pytest.raises(VocabError):
        vocab.align_word(
            "batsstss", ["b", "@", "t"], english_like_inventory, ("b", "a", "tsstss")
        )


def test_align_needs_exactly_one_vowel_phoneme(english_like_inventory):
    with pytest.raises(VocabError, match="one vowel phoneme"):
        vocab.align_word("cat", ["k", "t"], english_like_inventory)
    with pytest.raises(VocabError, match="one vowel phoneme"):
        vocab.align_word("cat", ["k", "@", "o"], english_like_inventory)


def test_align_rejects_unknown_phoneme(english_like_inventory):
    with pytest.raises(VocabError, match="unknown phoneme"):
        vocab.align_word("cat", ["k", "@", "x"], english_like_inventory)


def test_segment_spelling_examples():
    assert vocab.segment_spelling("coals") == ("c", "oa", "ls")
    assert vocab.segment_spelling("cat") == ("c", "a", "t")
    assert vocab.segment_spelling("at") == ("", "a", "t")
    assert vocab.segment_spelling("to") == ("t", "o", "")


def test_segment_spelling_maximal_run_is_capped_at_two():
    # 'eau' starts a three-letter vowel run; only two letters stay
    assert vocab.segment_spelling("beaut") == ("b", "ea", "ut")


def test_segment_spelling_y_counts_only_without_a_vowel():
    assert vocab.segment_spelling("by") == ("b", "y", "")
    assert vocab.segment_spelling("byte") == ("byt", "e", "")


def test_segment_spelling_needs_a_vowel():
    with pytest.raises(VocabError, match="no orthographic vowel"):
        vocab.segment_spelling("tsk")


# ----------------------------------------------------------------------
# Binary encodings

def test_encode_orthography_known_bits():
    # slot s (0-based) letter c sets bit 26*s + (ord(c) - ord('a')):
    # "__coals___" -> c@2, o@3, a@4, l@5, s@6
    o = vocab.encode_orthography("__coals___")
    assert set(np.flatnonzero(o)) == {54, 92, 104, 141, 174}
    assert o.shape == (260,)
    assert o.sum() == 5.0


def test_encode_orthography_first_and_last_bits():
    assert np.flatnonzero(vocab.encode_orthography("a_________")).tolist() == [0]
    assert np.flatnonzero(vocab.encode_orthography("_________z")).tolist() == [259]


def test_encode_orthography_all_pads_is_zero():
    assert not vocab.encode_orthography("_" * 10).any()


def test_encode_orthography_rejects_bad_input():
    with pytest.raises(VocabError):
        vocab.encode_orthography("short")
    with pytest.raises(VocabError):
        vocab.encode_orthography("__cA_t____")


def test_orthography_round_trip(english_like_inventory):
    for aligned in ["__coals___", "__ca_t____", "a_________", "_" * 10, "abcdefghij"]:
        assert vocab.decode_orthography(vocab.encode_orthography(aligned)) == aligned


def test_decode_orthography_rejects_double_bits():
    o = vocab.encode_orthography("__ca_t____")
    o[1] = 1.0
    o[2] = 1.0
    with pytest.raises(VocabError, match="2 set bits"):
        vocab.decode_orthography(o)


def test_encode_phonology_concatenates_slot_features(english_like_inventory):
    inv = english_like_inventory
    _, phon = vocab.align_word("cat", ["k", "@", "t"], inv)
    y = vocab.encode_phonology(phon, inv)
    assert y.shape == (200,)
    for slot, code in enumerate(phon):
        np.testing.assert_array_equal(
            y[slot * 25 : (slot + 1) * 25], inv.feature_vector(code)
        )
    # pads contribute nothing
    assert y[:50].sum() == 0.0


def test_encode_phonology_all_pads_is_zero(english_like_inventory):
    y = vocab.encode_phonology(("_",) * 8, english_like_inventory)
    assert not y.any()


def test_encode_phonology_rejects_wrong_slot_count(english_like_inventory):
    with pytest.raises(VocabError):
        vocab.encode_phonology(("_",) * 7, english_like_inventory)


# ----------------------------------------------------------------------
# Inventory parsing

def test_inventory_round_trip(english_like_inventory):
    text = vocab.inventory_to_tsv(english_like_inventory)
    again = vocab.parse_phoneme_inventory(text)
    assert again.codes == english_like_inventory.codes
    assert again.vocalic == english_like_inventory.vocalic
    np.testing.assert_array_equal(again.features, english_like_inventory.features)


def test_inventory_pad_is_implicit():
    inv = vocab.parse_phoneme_inventory("k\t" + "1" + "0" * 24 + "\t0\n")
    assert inv.codes == ("_", "k")
    assert not inv.features[0].any()


def test_inventory_rejects_malformed_lines():
    with pytest.raises(VocabError, match="3 tab-separated"):
        vocab.parse_phoneme_inventory("k\t101\n")
    with pytest.raises(VocabError, match="binary digits"):
        vocab.parse_phoneme_inventory("k\t" + "2" * 25 + "\t0\n")
    with pytest.raises(VocabError, match="vocalic flag"):
        vocab.parse_phoneme_inventory("k\t" + "1" + "0" * 24 + "\tx\n")


def test_inventory_rejects_duplicate_codes():
    line = "k\t" + "1" + "0" * 24 + "\t0\n"
    other = "k\t" + "01" + "0" * 23 + "\t0\n"
    with pytest.raises(VocabError, match="duplicate"):
        vocab.parse_phoneme_inventory(line + other)


def test_inventory_rejects_shared_feature_vectors():
    bits = "1" + "0" * 24
    with pytest.raises(VocabError, match="share a feature vector"):
        vocab.parse_phoneme_inventory(f"k\t{bits}\t0\ng\t{bits}\t0\n")


def test_feature_vector_unknown_code(english_like_inventory):
    with pytest.raises(VocabError, match="unknown phoneme"):
        english_like_inventory.feature_vector("q")


# ----------------------------------------------------------------------
# Vocabulary parsing

_VOCAB_TSV = (
    "word\tonset\tvowel\tcoda\tphonemes\tfreq\taoa\n"
    "coals\t\t\t\tk o l z\t10\t2.5\n"
    "cat\tc\ta\tt\tk @ t\t20\t\n"
    "# a comment line\n"
    "boat\t\t\t\tb o t\t\t4.0\n"
)


def test_parse_vocabulary_basics(english_like_inventory):
    v = vocab.parse_vocabulary(_VOCAB_TSV, english_like_inventory)
    assert len(v) == 3
    coals = v.find("coals")
    assert coals.aligned_orth == "__coals___"
    assert coals.weights == {"freq": 10.0, "aoa": 2.5}
    cat = v.find("cat")
    assert cat.weights == {"freq": 20.0}
    assert "aoa" not in cat.weights
    boat = v.find("boat")
    assert boat.onset == "b" and boat.vowel == "oa" and boat.coda == "t"


def test_parse_vocabulary_collects_row_errors(english_like_inventory):
    bad = (
        "word\tonset\tvowel\tcoda\tphonemes\n"
        "cat\t\t\t\tk @ t\n"
        "tsk\t\t\t\tt k\n"
        "cat\t\t\t\tk @ t\n"
    )
    with pytest.raises(VocabError) as exc:
        vocab.parse_vocabulary(bad, english_like_inventory)
    msg = str(exc.value)
    assert "row 3" in msg and "row 4" in msg
    assert "duplicate" in msg


def test_parse_vocabulary_rejects_bad_weight(english_like_inventory):
    bad = "word\tonset\tvowel\tcoda\tphonemes\tfreq\ncat\t\t\t\tk @ t\t-1\n"
    with pytest.raises(VocabError, match="finite and nonnegative"):
        vocab.parse_vocabulary(bad, english_like_inventory)


def test_parse_vocabulary_requires_header(english_like_inventory):
    with pytest.raises(VocabError, match="missing header"):
        vocab.parse_vocabulary("\n\n", english_like_inventory)
    with pytest.raises(VocabError, match="header must start"):
        vocab.parse_vocabulary("word\tphonemes\ncat\tk @ t\n", english_like_inventory)


def test_vocabulary_tsv_round_trip(regular_vocab):
    text = vocab.vocabulary_to_tsv(regular_vocab)
    again = vocab.parse_vocabulary(text, regular_vocab.inventory)
    assert len(again) == len(regular_vocab)
    for a, b in zip(again.items, regular_vocab.items):
        assert a.word == b.word
        assert a.aligned_orth == b.aligned_orth
        assert a.aligned_phon == b.aligned_phon
        assert a.weights.keys() == b.weights.keys()
        for k in a.weights:
            assert a.weights[k] == pytest.approx(b.weights[k], rel=1e-5)


def test_find_missing_word(regular_vocab):
    with pytest.raises(VocabError, match="not in vocabulary"):
        regular_vocab.find("xyzzy")


# ----------------------------------------------------------------------
# Splits

def test_split_is_deterministic_and_disjoint(regular_vocab):
    a = vocab.split_vocabulary(regular_vocab, 20, seed=3)
    b = vocab.split_vocabulary(regular_vocab, 20, seed=3)
    np.testing.assert_array_equal(a.pool_indices, b.pool_indices)
    assert a.K == 20
    pool, test = set(a.pool_indices.tolist()), set(a.test_indices.tolist())
    assert not pool & test
    assert pool | test == set(range(len(regular_vocab)))
    assert np.all(np.diff(a.pool_indices) > 0)


def test_split_varies_with_seed(regular_vocab):
    a = vocab.split_vocabulary(regular_vocab, 20, seed=3)
    b = vocab.split_vocabulary(regular_vocab, 20, seed=4)
    assert not np.array_equal(a.pool_indices, b.pool_indices)


def test_split_rejects_degenerate_sizes(regular_vocab):
    n = len(regular_vocab)
    for K in (0, n, n + 5, -1):
        with pytest.raises(VocabError):
            vocab.split_vocabulary(regular_vocab, K, seed=1)


def test_split_membership_is_uniform(regular_vocab):
    # each word should land in a K=15 pool with probability 1/4
    n, K, reps = len(regular_vocab), 15, 4000
    counts = np.zeros(n)
    for seed in range(reps):
        counts[vocab.split_vocabulary(regular_vocab, K, seed).pool_indices] += 1
    p = K / n
    bound = 4.0 * np.sqrt(p * (1 - p) * reps)
    assert np.abs(counts - p * reps).max() <= bound


# ----------------------------------------------------------------------
# Synthetic generation

def test_synthetic_respects_spec(regular_vocab):
    assert len(regular_vocab) == 60
    words = {it.word for it in regular_vocab.items}
    assert len(words) == 60
    cons = set(vocab.CONSONANT_LETTERS[:6])
    vows = set(vocab.VOWEL_GRAPHEMES[:3])
    for it in regular_vocab.items:
        assert set(it.onset) <= cons and set(it.coda) <= cons
        assert it.vowel in vows
        assert (len(it.onset), len(it.coda)) in {(1, 1), (2, 1), (1, 2)}


def test_synthetic_is_deterministic():
    spec = {"n_words": 40, "n_consonants": 5, "n_vowel_graphemes": 3, "exception_rate": 0.3}
    a = vocab.generate_synthetic_vocabulary(spec, seed=5)
    b = vocab.generate_synthetic_vocabulary(spec, seed=5)
    assert vocab.vocabulary_to_tsv(a) == vocab.vocabulary_to_tsv(b)
    c = vocab.generate_synthetic_vocabulary(spec, seed=6)
    assert vocab.vocabulary_to_tsv(a) != vocab.vocabulary_to_tsv(c)


def test_synthetic_regular_words_follow_the_rule(regular_vocab):
    for it in regular_vocab.items:
        assert it.weights["is_exception"] == 0.0
        assert it.aligned_phon[3] == it.vowel.upper()


def test_synthetic_exception_rate_is_respected():
    spec = {"n_words": 300, "n_consonants": 8, "n_vowel_graphemes": 4, "exception_rate": 0.2}
    v = vocab.generate_synthetic_vocabulary(spec, seed=9)
    n_exc = sum(it.weights["is_exception"] for it in v.items)
    sigma = np.sqrt(300 * 0.2 * 0.8)
    assert abs(n_exc - 60) <= 4 * sigma
    for it in v.items:
        if it.weights["is_exception"]:
            assert it.aligned_phon[3] != it.vowel.upper()
        else:
            assert it.aligned_phon[3] == it.vowel.upper()


def test_synthetic_zipf_weights():
    spec = {"n_words": 30, "n_consonants": 5, "n_vowel_graphemes": 2,
            "exception_rate": 0.0, "zipf_exponent": 1.5}
    v = vocab.generate_synthetic_vocabulary(spec, seed=2)
    freqs = [it.weights["freq"] for it in v.items]
    for rank, f in enumerate(freqs, start=1):
        assert f == pytest.approx(rank ** -1.5)


def test_synthetic_rejects_impossible_specs():
    with pytest.raises(VocabError, match="exceeds"):
        vocab.generate_synthetic_vocabulary(
            {"n_words": 1000, "n_consonants": 2, "n_vowel_graphemes": 2,
             "exception_rate": 0.0}, seed=1)
    with pytest.raises(VocabError, match="at least 2 vowel"):
        vocab.generate_synthetic_vocabulary(
            {"n_words": 5, "n_consonants": 3, "n_vowel_graphemes": 1,
             "exception_rate": 0.5}, seed=1)
    with pytest.raises(VocabError):
        vocab.generate_synthetic_vocabulary(
            {"n_words": 5, "n_consonants": 3, "n_vowel_graphemes": 2,
             "exception_rate": 1.5}, seed=1)


def test_synthetic_feature_vectors_are_well_separated(quasiregular_vocab):
    F = quasiregular_vocab.inventory.features
    assert (F[1:].sum(axis=1) == 6).all()
    n = len(F)
    for i in range(n):
        for j in range(i + 1, n):
            assert np.abs(F[i] - F[j]).sum() >= 6


def test_alignment_invariants_hold_across_synthetic_words(quasiregular_vocab):
    for it in quasiregular_vocab.items:
        assert it.aligned_orth[3] == it.vowel[0]
        assert vocab.decode_orthography(it.o) == it.aligned_orth
        assert it.o.sum() == sum(1 for ch in it.aligned_orth if ch != "_")
        assert it.aligned_phon[2] == it.onset[-1]


def test_build_item_carries_segmentation_and_weights(english_like_inventory):
    it = vocab.build_item(
        "coals", ["k", "o", "l", "z"], english_like_inventory, weights={"freq": 3.0}
    )
    assert (it.onset, it.vowel, it.coda) == ("c", "oa", "ls")
    assert it.weights == {"freq": 3.0}
    assert it.o.shape == (260,) and it.y.shape == (200,)


def test_small_inventory_helper_orders_codes():
    inv = small_inventory([("a", True), ("b", False)])
    assert inv.codes == ("_", "a", "b")
    assert inv.vocalic == (False, True, False)
