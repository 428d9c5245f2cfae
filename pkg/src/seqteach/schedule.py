"""Sampling distributions over the training pool.

A schedule is a pair of multinomials (P, Q) over the K pool items.
Training round t draws from the linear interpolation R_t between them,
so P shapes the early curriculum and Q the late one. Distributions are
parametrized by logits with the last component pinned to 1, which
removes the scale degeneracy of the softmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vocab import PoolSplit, Vocabulary

PROB_TOL = 1e-9
_SAMPLE_CHUNK = 4096


@dataclass(frozen=True)
class Multinomial:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("probs must be a nonempty vector")
        if (p < 0).any():
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")

    @property
    def K(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class LogitVector:
    """K-1 free logits; the K-th logit is implicitly fixed to 1."""

    free: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.free, dtype=np.float64)
        object.__setattr__(self, "free", f)
        if not np.isfinite(f).all():
            raise ValueError("logits must be finite")

    @property
    def K(self) -> int:
        return len(self.free) + 1


@dataclass(frozen=True)
class TimeVaryingDistribution:
    alpha: LogitVector
    beta: LogitVector
    horizon: int

    def __post_init__(self):
        if self.alpha.K != self.beta.K:
            raise ValueError("alpha and beta must have the same K")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")

    @property
    def K(self) -> int:
        return self.alpha.K


@dataclass(frozen=True)
class TrainingSequence:
    item_indices: np.ndarray  # values in [0, K), length T
    provenance: tuple[str, int]  # (distribution id, seed)


def softmax_full(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def logits_to_multinomial(logits: LogitVector) -> Multinomial:
    """Softmax over the K logits (free components plus the fixed 1)."""
    full = np.concatenate([logits.free, [1.0]])
    return Multinomial(softmax_full(full))


def probs_to_logits(m: Multinomial) -> LogitVector:
    """Inverse of logits_to_multinomial up to softmax precision.

    Zero probabilities are floored at 1e-300, which reproduces them to
    within double precision after the round trip.
    """
    p = np.clip(m.probs, 1e-300, None)
    return LogitVector(1.0 + np.log(p[:-1] / p[-1]))


def interpolate(P: Multinomial, Q: Multinomial, t: int, T: int) -> Multinomial:
    """R_t = ((T - t)/T) P + (t/T) Q."""
    if P.K != Q.K:
        raise ValueError("P and Q must have the same K")
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    w = t / T
    return Multinomial((1.0 - w) * P.probs + w * Q.probs)


def interpolation_weights(T: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    stop = T if stop is None else stop
    return np.arange(start, stop, dtype=np.float64) / T


def sample_interpolated_indices(
    P: np.ndarray, Q: np.ndarray, T: int, seed: int
) -> np.ndarray:
    """Inverse-CDF categorical draws from R_t for t = 0 .. T-1.

    Rounds range over 0..T-1: exactly T draws, so R_T itself is never
    sampled. Deterministic in seed and independent of chunking.
    """
    rng = np.random.default_rng(seed)
    out = np.empty(T, dtype=np.int64)
    K = len(P)
    for lo in range(0, T, _SAMPLE_CHUNK):
        hi = min(lo + _SAMPLE_CHUNK, T)
        w = interpolation_weights(T, lo, hi)[:, None]
        R = (1.0 - w) * P[None, :] + w * Q[None, :]
        cum = R.cumsum(axis=1)
        u = rng.random(hi - lo)
        out[lo:hi] = np.minimum((cum < u[:, None]).sum(axis=1), K - 1)
    return out


def sample_sequence(
    tvd: TimeVaryingDistribution, seed: int, dist_id: str = "tvd"
) -> TrainingSequence:
    """Draw the length-T item sequence u_0 .. u_{T-1}."""
    P = logits_to_multinomial(tvd.alpha).probs
    Q = logits_to_multinomial(tvd.beta).probs
    idx = sample_interpolated_indices(P, Q, tvd.horizon, seed)
    return TrainingSequence(item_indices=idx, provenance=(dist_id, seed))


def stationary(P: Multinomial, horizon: int) -> TimeVaryingDistribution:
    """Constant-in-time schedule with both endpoints equal to P."""
    logits = probs_to_logits(P)
    return TimeVaryingDistribution(alpha=logits, beta=logits, horizon=horizon)


def uniform_multinomial(K: int) -> Multinomial:
    return Multinomial(np.full(K, 1.0 / K))


def baseline_distribution(
    vocab: Vocabulary,
    pool: PoolSplit,
    kind: str,
    transform: str = "identity",
) -> Multinomial:
    """Stationary baseline over the pool.

    kind "uniform" gives 1/K each; any other kind names a weight
    column, with probabilities proportional to the (optionally
    transformed) weights. transform "inverse" maps w to 1/(w + 1e-6),
    which turns age-of-acquisition norms into earlier-is-more-probable
    weights.
    """
    K = pool.K
    if kind == "uniform":
        return uniform_multinomial(K)
    if transform not in ("identity", "inverse"):
        raise ValueError(f"unknown transform {transform!r}")
    w = np.empty(K)
    for j, i in enumerate(pool.pool_indices):
        item = vocab[int(i)]
        if kind not in item.weights:
            raise ValueError(f"word {item.word!r} lacks weight column {kind!r}")
        w[j] = item.weights[kind]
    if transform == "inverse":
        w = 1.0 / (w + 1e-6)
    total = w.sum()
    if total <= 0:
        raise ValueError(f"weight column {kind!r} sums to zero over the pool")
    return Multinomial(w / total)


def distribution_to_csv(
    vocab: Vocabulary, pool: PoolSplit, P: Multinomial, Q: Multinomial
) -> str:
    """Flat per-word export of a schedule: word, p_start, p_end, mean."""
    lines = ["word,p_start,p_end,mean_pq"]
    for j, i in enumerate(pool.pool_indices):
        p, q = float(P.probs[j]), float(Q.probs[j])
        lines.append(f"{vocab[int(i)].word},{p!r},{q!r},{(p + q) / 2.0!r}")
    return "\n".join(lines) + "\n"
