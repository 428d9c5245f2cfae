from __future__ import annotations

import numpy as np
import pytest

from seqteach import vocab


def small_inventory(codes_vocalic):
    """Inventory whose i-th phoneme has feature bits 3i..3i+2 set.

    Patterns are disjoint, so every pair sits at Hamming distance 6.
    Supports up to 8 phonemes plus the padding entry.
    """
    entries = []
    for i, (code, voc) in enumerate(codes_vocalic):
        f = np.zeros(vocab.N_FEATURES)
        f[3 * i : 3 * i + 3] = 1.0
        entries.append((code, f, voc))
    return vocab.make_inventory(entries)


@pytest.fixture(scope="session")
def english_like_inventory():
    """Enough phonemes to align a handful of real English words."""
    return small_inventory(
        [
            ("k", False),
            ("o", True),
            ("l", False),
            ("z", False),
            ("@", True),
            ("t", False),
            ("s", False),
            ("b", False),
        ]
    )


@pytest.fixture(scope="session")
def regular_vocab():
    """60 fully regular synthetic words (no exceptions)."""
    spec = {
        "n_words": 60,
        "n_consonants": 6,
        "n_vowel_graphemes": 3,
        "exception_rate": 0.0,
        "zipf_exponent": 1.0,
    }
    return vocab.generate_synthetic_vocabulary(spec, seed=7)


@pytest.fixture(scope="session")
def quasiregular_vocab():
    """120 words with a 25% exception rate, for analysis tests."""
    spec = {
        "n_words": 120,
        "n_consonants": 8,
        "n_vowel_graphemes": 4,
        "exception_rate": 0.25,
        "zipf_exponent": 1.0,
    }
    return vocab.generate_synthetic_vocabulary(spec, seed=11)
