"""Lexicon handling: slot alignment, binary encoding, splits, synthesis.

Words are monosyllables segmented into onset, vowel grapheme, and coda.
The spelling is laid out on 10 character slots with the first vowel
letter pinned to slot 4, and the pronunciation on 8 phoneme slots with
the vowel phoneme pinned to slot 4. Each aligned form is then encoded
as a fixed-width binary vector: 26 one-hot letter bits per orthographic
slot (260 total) and 25 articulatory feature bits per phoneme slot
(200 total).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .seeds import mix

N_ORTH_SLOTS = 10
N_PHON_SLOTS = 8
N_FEATURES = 25
ORTH_DIM = N_ORTH_SLOTS * 26
PHON_DIM = N_PHON_SLOTS * N_FEATURES

PAD = "_"
VOWEL_LETTERS = set("aeiou")

# Slot budget, 0-based: onset ends at index 2, vowel grapheme occupies
# indices 3-4, coda starts at index 5. Phoneme slots: onset ends at
# index 2, vowel at index 3, coda from index 4.
MAX_ONSET_LETTERS = 3
MAX_VOWEL_LETTERS = 2
MAX_CODA_LETTERS = 5
MAX_ONSET_PHONEMES = 3
MAX_CODA_PHONEMES = 4


class VocabError(ValueError):
    """Raised for malformed inventories, vocabularies, or alignments."""


@dataclass(frozen=True)
class PhonemeInventory:
    """Ordered phoneme set with binary articulatory features.

    Entry 0 is always the padding phoneme "_" with all-zero features.
    """

    codes: tuple[str, ...]
    features: np.ndarray  # (n_phonemes, 25) float64 of 0/1
    vocalic: tuple[bool, ...]
    index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "index", {c: i for i, c in enumerate(self.codes)})

    def __len__(self) -> int:
        return len(self.codes)

    def feature_vector(self, code: str) -> np.ndarray:
        try:
            return self.features[self.index[code]]
        except KeyError:
            raise VocabError(f"unknown phoneme code {code!r}") from None


def _validate_inventory(codes, features, vocalic):
    if codes[0] != PAD or features[0].any():
        raise VocabError("entry 0 must be the all-zero padding phoneme '_'")
    if len(set(codes)) != len(codes):
        dupes = sorted({c for c in codes if codes.count(c) > 1})
        raise VocabError(f"duplicate phoneme codes: {dupes}")
    seen = {}
    for code, f in zip(codes, features):
        key = f.tobytes()
        if key in seen:
            raise VocabError(f"phonemes {seen[key]!r} and {code!r} share a feature vector")
        seen[key] = code


def make_inventory(entries: list[tuple[str, np.ndarray, bool]]) -> PhonemeInventory:
    """Build an inventory, prepending the padding phoneme if absent."""
    if not entries or entries[0][0] != PAD:
        entries = [(PAD, np.zeros(N_FEATURES), False)] + list(entries)
    codes = tuple(e[0] for e in entries)
    features = np.array([e[1] for e in entries], dtype=np.float64)
    vocalic = tuple(bool(e[2]) for e in entries)
    if features.shape[1] != N_FEATURES:
        raise VocabError(f"feature vectors must have {N_FEATURES} components")
    _validate_inventory(codes, features, vocalic)
    return PhonemeInventory(codes, features, vocalic)


def parse_phoneme_inventory(text: str) -> PhonemeInventory:
    """Parse inventory TSV lines "code<TAB>25 binary digits<TAB>vocalic".

    Lines starting with '#' and blank lines are ignored. The padding
    phoneme is added automatically when the file does not list it.
    """
    entries = []
    for ln, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise VocabError(f"inventory line {ln}: expected 3 tab-separated fields")
        code, bits, voc = parts[0].strip(), parts[1].strip(), parts[2].strip()
        if len(bits) != N_FEATURES or set(bits) - {"0", "1"}:
            raise VocabError(f"inventory line {ln}: need {N_FEATURES} binary digits")
        if voc not in ("0", "1"):
            raise VocabError(f"inventory line {ln}: vocalic flag must be 0 or 1")
        entries.append((code, np.array([float(b) for b in bits]), voc == "1"))
    return make_inventory(entries)


def inventory_to_tsv(inv: PhonemeInventory) -> str:
    lines = ["# code\tfeatures\tvocalic"]
    for code, feats, voc in zip(inv.codes, inv.features, inv.vocalic):
        bits = "".join(str(int(b)) for b in feats)
        lines.append(f"{code}\t{bits}\t{int(voc)}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class WordItem:
    word: str
    onset: str
    vowel: str
    coda: str
    aligned_orth: str
    aligned_phon: tuple[str, ...]
    o: np.ndarray
    y: np.ndarray
    weights: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Vocabulary:
    items: tuple[WordItem, ...]
    inventory: PhonemeInventory

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> WordItem:
        return self.items[i]

    def find(self, word: str) -> WordItem:
        for it in self.items:
            if it.word == word:
                return it
        raise VocabError(f"word {word!r} not in vocabulary")


@dataclass(frozen=True)
class PoolSplit:
    pool_indices: np.ndarray
    test_indices: np.ndarray

    @property
    def K(self) -> int:
        return len(self.pool_indices)


def segment_spelling(spelling: str) -> tuple[str, str, str]:
    """Heuristic onset|vowel|coda split of a spelling.

    The vowel grapheme is the maximal run of vowel letters starting at
    the first vowel letter, truncated to two letters. 'y' counts as a
    vowel only when no earlier vowel letter exists.
    """
    first = None
    for i, ch in enumerate(spelling):
        if ch in VOWEL_LETTERS:
            first = i
            break
    if first is None:
        first = spelling.find("y")
        if first < 0:
            raise VocabError(f"no orthographic vowel in {spelling!r}")
        vowels = VOWEL_LETTERS | {"y"}
    else:
        vowels = VOWEL_LETTERS
    end = first
    while end < len(spelling) and spelling[end] in vowels:
        end += 1
    end = min(end, first + MAX_VOWEL_LETTERS)
    return spelling[:first], spelling[first:end], spelling[end:]


def align_word(
    spelling: str,
    phonemes: list[str],
    inventory: PhonemeInventory,
    segmentation: tuple[str, str, str] | None = None,
) -> tuple[str, tuple[str, ...]]:
    """Lay a word out on the 10 orthographic and 8 phoneme slots.

    Returns (aligned_orth, aligned_phon). When segmentation is given it
    overrides the spelling heuristic; it must concatenate back to the
    spelling. The phoneme list is segmented by the inventory's vocalic
    flags and must contain exactly one vowel phoneme.
    """
    if len(spelling) < 2:
        raise VocabError(f"spelling {spelling!r} too short")
    if segmentation is not None:
        onset, vowel, coda = segmentation
        if onset + vowel + coda != spelling:
            raise VocabError(f"segmentation {segmentation!r} does not spell {spelling!r}")
        if not vowel:
            raise VocabError(f"empty vowel segment for {spelling!r}")
    else:
        onset, vowel, coda = segment_spelling(spelling)

    if len(onset) > MAX_ONSET_LETTERS:
        raise VocabError(f"{spelling!r}: onset {onset!r} exceeds {MAX_ONSET_LETTERS} letters")
    if len(vowel) > MAX_VOWEL_LETTERS:
        raise VocabError(f"{spelling!r}: vowel {vowel!r} exceeds {MAX_VOWEL_LETTERS} letters")
    if len(coda) > MAX_CODA_LETTERS:
        raise VocabError(f"{spelling!r}: coda {coda!r} exceeds {MAX_CODA_LETTERS} letters")

    orth = [PAD] * N_ORTH_SLOTS
    for i, ch in enumerate(onset):
        orth[3 - len(onset) + i] = ch
    orth[3] = vowel[0]
    if len(vowel) == 2:
        orth[4] = vowel[1]
    for i, ch in enumerate(coda):
        orth[5 + i] = ch

    voc_positions = []
    for i, code in enumerate(phonemes):
        idx = inventory.index.get(code)
        if idx is None:
            raise VocabError(f"{spelling!r}: unknown phoneme code {code!r}")
        if inventory.vocalic[idx]:
            voc_positions.append(i)
    if len(voc_positions) != 1:
        raise VocabError(
            f"{spelling!r}: need exactly one vowel phoneme, found {len(voc_positions)}"
        )
    v = voc_positions[0]
    p_onset, p_coda = phonemes[:v], phonemes[v + 1 :]
    if len(p_onset) > MAX_ONSET_PHONEMES:
        raise VocabError(f"{spelling!r}: {len(p_onset)} onset phonemes exceed {MAX_ONSET_PHONEMES}")
    if len(p_coda) > MAX_CODA_PHONEMES:
        raise VocabError(f"{spelling!r}: {len(p_coda)} coda phonemes exceed {MAX_CODA_PHONEMES}")

    phon = [PAD] * N_PHON_SLOTS
    for i, code in enumerate(p_onset):
        phon[3 - len(p_onset) + i] = code
    phon[3] = phonemes[v]
    for i, code in enumerate(p_coda):
        phon[4 + i] = code
    return "".join(orth), tuple(phon)


def encode_orthography(aligned_orth: str) -> np.ndarray:
    """One-hot encode a 10-slot spelling as a 260-bit vector."""
    if len(aligned_orth) != N_ORTH_SLOTS:
        raise VocabError(f"aligned spelling must have {N_ORTH_SLOTS} slots")
    o = np.zeros(ORTH_DIM)
    for slot, ch in enumerate(aligned_orth):
        if ch == PAD:
            continue
        rank = ord(ch) - ord("a")
        if not 0 <= rank < 26:
            raise VocabError(f"slot {slot + 1}: {ch!r} is not a lowercase letter")
        o[slot * 26 + rank] = 1.0
    return o


def decode_orthography(o: np.ndarray) -> str:
    """Inverse of encode_orthography, for round-trip checks."""
    slots = []
    for slot in range(N_ORTH_SLOTS):
        block = o[slot * 26 : (slot + 1) * 26]
        hits = np.flatnonzero(block)
        if len(hits) == 0:
            slots.append(PAD)
        elif len(hits) == 1:
            slots.append(chr(ord("a") + hits[0]))
        else:
            raise VocabError(f"slot {slot + 1} has {len(hits)} set bits")
    return "".join(slots)


def encode_phonology(aligned_phon: tuple[str, ...], inventory: PhonemeInventory) -> np.ndarray:
    """Concatenate the 8 slot feature vectors into a 200-bit vector."""
    if len(aligned_phon) != N_PHON_SLOTS:
        raise VocabError(f"aligned phonology must have {N_PHON_SLOTS} slots")
    return np.concatenate([inventory.feature_vector(c) for c in aligned_phon])


def _parse_weight(raw: str, column: str, ln: int) -> float | None:
    raw = raw.strip()
    if not raw:
        return None
    try:
        v = float(raw)
    except ValueError:
        raise VocabError(f"row {ln}: weight {column!r} is not numeric") from None
    if v < 0 or not math.isfinite(v):
        raise VocabError(f"row {ln}: weight {column!r} must be finite and nonnegative")
    return v


def build_item(
    word: str,
    phonemes: list[str],
    inventory: PhonemeInventory,
    segmentation: tuple[str, str, str] | None = None,
    weights: dict[str, float] | None = None,
) -> WordItem:
    aligned_orth, aligned_phon = align_word(word, phonemes, inventory, segmentation)
    if segmentation is None:
        segmentation = segment_spelling(word)
    return WordItem(
        word=word,
        onset=segmentation[0],
        vowel=segmentation[1],
        coda=segmentation[2],
        aligned_orth=aligned_orth,
        aligned_phon=aligned_phon,
        o=encode_orthography(aligned_orth),
        y=encode_phonology(aligned_phon, inventory),
        weights=dict(weights or {}),
    )


def parse_vocabulary(text: str, inventory: PhonemeInventory) -> Vocabulary:
    """Parse a vocabulary TSV.

    Header: word, onset, vowel, coda, phonemes, then any number of
    named weight columns. Blank onset/vowel/coda fall back to the
    heuristic segmentation; blank weights mean the word lacks that
    column. Row errors are collected and reported together.
    """
    lines = [l for l in text.splitlines()]
    header = None
    items: list[WordItem] = []
    errors: list[str] = []
    seen: set[str] = set()
    for ln, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if header is None:
            header = [p.strip() for p in parts]
            required = ["word", "onset", "vowel", "coda", "phonemes"]
            if header[: len(required)] != required:
                raise VocabError(f"header must start with {required}, got {header}")
            weight_cols = header[len(required) :]
            continue
        parts += [""] * (len(header) - len(parts))
        word = parts[0].strip()
        try:
            if word in seen:
                raise VocabError(f"duplicate word {word!r}")
            onset, vowel, coda = parts[1].strip(), parts[2].strip(), parts[3].strip()
            seg = (onset, vowel, coda) if (onset or vowel or coda) else None
            phonemes = parts[4].split()
            weights = {}
            for col, raw in zip(weight_cols, parts[5:]):
                v = _parse_weight(raw, col, ln)
                if v is not None:
                    weights[col] = v
            items.append(build_item(word, phonemes, inventory, seg, weights))
            seen.add(word)
        except VocabError as e:
            errors.append(f"row {ln}: {e}")
    if header is None:
        raise VocabError("missing header line")
    if errors:
        raise VocabError("invalid vocabulary rows:\n  " + "\n  ".join(errors))
    return Vocabulary(tuple(items), inventory)


def vocabulary_to_tsv(vocab: Vocabulary) -> str:
    cols: list[str] = []
    for it in vocab.items:
        for k in it.weights:
            if k not in cols:
                cols.append(k)
    lines = ["\t".join(["word", "onset", "vowel", "coda", "phonemes"] + cols)]
    for it in vocab.items:
        w = [("%g" % it.weights[c]) if c in it.weights else "" for c in cols]
        phon = " ".join(c for c in it.aligned_phon if c != PAD)
        lines.append("\t".join([it.word, it.onset, it.vowel, it.coda, phon] + w))
    return "\n".join(lines) + "\n"


def split_vocabulary(vocab: Vocabulary, K: int, seed: int) -> PoolSplit:
    """Uniformly random K-item training pool, deterministic in seed."""
    n = len(vocab)
    if not 0 < K < n:
        raise VocabError(f"K must be in (0, {n}), got {K}")
    perm = np.random.default_rng(seed).permutation(n)
    return PoolSplit(np.sort(perm[:K]), np.sort(perm[K:]))


# ----------------------------------------------------------------------
# Synthetic quasiregular vocabulary

CONSONANT_LETTERS = "bdfgklmnprstvz"
_VOWEL_SINGLES = "aeiou"
# grapheme catalogue: the five single letters, then two-letter
# combinations in alphabetical order (aa, ae, ai, ...)
VOWEL_GRAPHEMES = list(_VOWEL_SINGLES) + [
    a + b for a in _VOWEL_SINGLES for b in _VOWEL_SINGLES
]

_FEATURE_BITS = 6
_FEATURE_MIN_DIST = 6
_SHAPE_CVC, _SHAPE_CCVC, _SHAPE_CVCC = 0.8, 0.1, 0.1


def _sparse_features(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n distinct 25-bit vectors with 6 set bits, pairwise Hamming
    distance at least 6 (and at least 6 from the all-zero pad)."""
    feats: list[np.ndarray] = []
    attempts = 0
    while len(feats) < n:
        attempts += 1
        if attempts > 200 * (n + 1):
            raise VocabError(f"cannot place {n} feature vectors at distance {_FEATURE_MIN_DIST}")
        f = np.zeros(N_FEATURES)
        f[rng.choice(N_FEATURES, _FEATURE_BITS, replace=False)] = 1.0
        if all(np.abs(f - g).sum() >= _FEATURE_MIN_DIST for g in feats):
            feats.append(f)
    return np.array(feats)


def generate_synthetic_vocabulary(spec: dict, seed: int) -> Vocabulary:
    """Generate a quasiregular CVC/CCVC/CVCC vocabulary.

    spec keys: n_words, n_consonants, n_vowel_graphemes, exception_rate,
    zipf_exponent. Each consonant letter maps to a same-named phoneme;
    each vowel grapheme maps to a canonical vowel phoneme (its uppercase
    code), except that an exception_rate fraction of words have their
    vowel remapped to a different vowel phoneme. Words carry a Zipf
    "freq" weight by generation rank and an "is_exception" marker.
    """
    n_words = int(spec["n_words"])
    ncons = int(spec["n_consonants"])
    nvow = int(spec["n_vowel_graphemes"])
    exception_rate = float(spec["exception_rate"])
    zipf_exponent = float(spec.get("zipf_exponent", 1.0))
    if n_words <= 0 or ncons <= 0 or nvow <= 0:
        raise VocabError("n_words, n_consonants, n_vowel_graphemes must be positive")
    if not 0 <= exception_rate <= 1:
        raise VocabError("exception_rate must be in [0, 1]")
    if ncons > len(CONSONANT_LETTERS):
        raise VocabError(f"at most {len(CONSONANT_LETTERS)} consonants available")
    if nvow > len(VOWEL_GRAPHEMES):
        raise VocabError(f"at most {len(VOWEL_GRAPHEMES)} vowel graphemes available")
    if nvow < 2 and exception_rate > 0:
        raise VocabError("exceptions need at least 2 vowel graphemes")

    cons = CONSONANT_LETTERS[:ncons]
    vows = VOWEL_GRAPHEMES[:nvow]
    capacity = ncons * nvow * ncons * (1 + 2 * ncons)
    if n_words > capacity:
        raise VocabError(f"n_words={n_words} exceeds the {capacity} distinct word forms")

    rng = np.random.default_rng(mix(seed, "synthetic-vocab"))
    vowel_codes = [g.upper() for g in vows]
    all_feats = _sparse_features(ncons + nvow, rng)
    entries = [(c, all_feats[i], False) for i, c in enumerate(cons)]
    entries += [(v, all_feats[ncons + i], True) for i, v in enumerate(vowel_codes)]
    inventory = make_inventory(entries)

    words: set[str] = set()
    items: list[WordItem] = []
    attempts = 0
    while len(items) < n_words:
        attempts += 1
        if attempts > 200 * n_words:
            raise VocabError("word generation stalled; lower n_words")
        r = rng.random()
        if r < _SHAPE_CVC:
            n_on, n_co = 1, 1
        elif r < _SHAPE_CVC + _SHAPE_CCVC:
            n_on, n_co = 2, 1
        else:
            n_on, n_co = 1, 2
        onset = "".join(rng.choice(list(cons), n_on))
        vowel = vows[rng.integers(nvow)]
        coda = "".join(rng.choice(list(cons), n_co))
        word = onset + vowel + coda
        if word in words:
            continue
        vph = vowel.upper()
        is_exc = rng.random() < exception_rate
        if is_exc:
            others = [c for c in vowel_codes if c != vph]
            vph = others[rng.integers(len(others))]
        phonemes = list(onset) + [vph] + list(coda)
        rank = len(items) + 1
        weights = {
            "freq": rank ** (-zipf_exponent),
            "is_exception": float(is_exc),
        }
        items.append(build_item(word, phonemes, inventory, (onset, vowel, coda), weights))
        words.add(word)
    return Vocabulary(tuple(items), inventory)
