"""The cognitive model: a 260-100-200 sigmoid network trained online.

The learner maps a one-hot spelling vector to 200 phoneme feature
activations through one hidden layer, sigmoid everywhere. Training is
one Nesterov-momentum step of the summed cross-entropy loss per word
presentation. A prediction counts as correct only when every one of
the 8 decoded phoneme slots matches the target exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .vocab import (
    N_FEATURES,
    N_PHON_SLOTS,
    ORTH_DIM,
    PHON_DIM,
    PhonemeInventory,
    WordItem,
)

DEFAULT_LR = 0.02
DEFAULT_MOMENTUM = 0.9
INIT_SCALE = 0.1
CLAMP = 1e-12

DEFAULT_SHAPE = (ORTH_DIM, 100, PHON_DIM)


@dataclass(frozen=True)
class LearnerState:
    """Weights, biases, and momentum velocities. Treated as a value:
    train_step returns a new state and never mutates its argument."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    vW1: np.ndarray
    vb1: np.ndarray
    vW2: np.ndarray
    vb2: np.ndarray
    lr: float = DEFAULT_LR
    momentum: float = DEFAULT_MOMENTUM

    def copy(self) -> "LearnerState":
        return replace(
            self,
            W1=self.W1.copy(), b1=self.b1.copy(),
            W2=self.W2.copy(), b2=self.b2.copy(),
            vW1=self.vW1.copy(), vb1=self.vb1.copy(),
            vW2=self.vW2.copy(), vb2=self.vb2.copy(),
        )


@dataclass(frozen=True)
class Prediction:
    y_hat: np.ndarray
    decoded: tuple[str, ...]
    decoded_bits: np.ndarray


def init_learner(
    seed: int,
    init_scale: float = INIT_SCALE,
    shape: tuple[int, int, int] = DEFAULT_SHAPE,
    lr: float = DEFAULT_LR,
    momentum: float = DEFAULT_MOMENTUM,
) -> LearnerState:
    """Fresh learner: weights uniform in [-init_scale, +init_scale],
    biases and velocities zero. Deterministic in seed."""
    if init_scale < 0:
        raise ValueError("init_scale must be nonnegative")
    n_in, n_hid, n_out = shape
    rng = np.random.default_rng(seed)
    return LearnerState(
        W1=rng.uniform(-init_scale, init_scale, (n_hid, n_in)),
        b1=np.zeros(n_hid),
        W2=rng.uniform(-init_scale, init_scale, (n_out, n_hid)),
        b2=np.zeros(n_out),
        vW1=np.zeros((n_hid, n_in)),
        vb1=np.zeros(n_hid),
        vW2=np.zeros((n_out, n_hid)),
        vb2=np.zeros(n_out),
        lr=lr,
        momentum=momentum,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def raw_forward(state: LearnerState, o: np.ndarray) -> np.ndarray:
    """Network output before decoding."""
    h = _sigmoid(state.W1 @ o + state.b1)
    y_hat = _sigmoid(state.W2 @ h + state.b2)
    if not np.isfinite(y_hat).all():
        raise FloatingPointError("non-finite activations; learner state is corrupted")
    return y_hat


def forward(state: LearnerState, o: np.ndarray, inventory: PhonemeInventory) -> Prediction:
    y_hat = raw_forward(state, o)
    bits, codes = decode_output(y_hat, inventory)
    return Prediction(y_hat=y_hat, decoded=codes, decoded_bits=bits)


def loss(state: LearnerState, o: np.ndarray, y: np.ndarray) -> float:
    """Summed cross-entropy over the output units, clamped before log."""
    y_hat = np.clip(raw_forward(state, o), CLAMP, 1.0 - CLAMP)
    return float(-(y * np.log(y_hat) + (1.0 - y) * np.log(1.0 - y_hat)).sum())


def loss_gradient(
    state: LearnerState, o: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backprop gradient of the summed cross-entropy at the state's
    weights (no momentum lookahead): (gW1, gb1, gW2, gb2)."""
    h = _sigmoid(state.W1 @ o + state.b1)
    y_hat = _sigmoid(state.W2 @ h + state.b2)
    d_out = y_hat - y
    d_hid = (state.W2.T @ d_out) * h * (1.0 - h)
    return np.outer(d_hid, o), d_hid, np.outer(d_out, h), d_out


def _item_bits(o: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.flatnonzero(o).astype(np.int64)
    return idx.reshape(1, -1), np.array([len(idx)], dtype=np.int64)


def train_step(state: LearnerState, example: tuple[np.ndarray, np.ndarray]) -> LearnerState:
    """One presentation: v <- mu*v - lr*grad(w + mu*v); w <- w + v."""
    o, y = example
    out = state.copy()
    bit_idx, bit_count = _item_bits(o)
    _kernels.train_on_sequence(
        out.W1, out.b1, out.W2, out.b2,
        out.vW1, out.vb1, out.vW2, out.vb2,
        bit_idx, bit_count, y.reshape(1, -1),
        np.zeros(1, dtype=np.int64), state.lr, state.momentum,
    )
    return out


def train_on_items(
    state: LearnerState, items: list[tuple[np.ndarray, np.ndarray]], order: np.ndarray
) -> LearnerState:
    """Train on items in the given presentation order (indices into
    items). Bitwise identical to folding train_step over the order."""
    max_bits = max(int(o.sum()) for o, _ in items)
    bit_idx = np.zeros((len(items), max_bits), dtype=np.int64)
    bit_count = np.zeros(len(items), dtype=np.int64)
    Y = np.zeros((len(items), len(items[0][1])))
    for k, (o, y) in enumerate(items):
        idx = np.flatnonzero(o)
        bit_idx[k, : len(idx)] = idx
        bit_count[k] = len(idx)
        Y[k] = y
    out = state.copy()
    _kernels.train_on_sequence(
        out.W1, out.b1, out.W2, out.b2,
        out.vW1, out.vb1, out.vW2, out.vb2,
        bit_idx, bit_count, Y, np.asarray(order, dtype=np.int64),
        state.lr, state.momentum,
    )
    return out


def nearest_phoneme_indices(points: np.ndarray, inventory: PhonemeInventory) -> np.ndarray:
    """Index of the L2-nearest inventory phoneme for each row of
    points (m, 25). Ties resolve to the lowest inventory index, so the
    padding phoneme wins any tie it is part of."""
    F = inventory.features
    d = (points**2).sum(1)[:, None] - 2.0 * points @ F.T + (F**2).sum(1)[None, :]
    return d.argmin(axis=1)


def decode_phoneme(m_hat: np.ndarray, inventory: PhonemeInventory) -> str:
    if len(inventory) == 0:
        raise ValueError("empty inventory")
    if m_hat.shape != (N_FEATURES,):
        raise ValueError(f"expected a {N_FEATURES}-vector")
    idx = nearest_phoneme_indices(m_hat.reshape(1, -1), inventory)[0]
    return inventory.codes[idx]


def decode_output(
    y_hat: np.ndarray, inventory: PhonemeInventory
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Slot-wise nearest-phoneme decoding of a 200-vector.

    Returns the re-encoded 200-bit vector and the 8 phoneme codes.
    """
    if y_hat.shape != (PHON_DIM,):
        raise ValueError(f"expected a {PHON_DIM}-vector")
    idx = nearest_phoneme_indices(y_hat.reshape(N_PHON_SLOTS, N_FEATURES), inventory)
    bits = inventory.features[idx].reshape(-1)
    codes = tuple(inventory.codes[i] for i in idx)
    return bits, codes


def predict_correct(state: LearnerState, item: WordItem, inventory: PhonemeInventory) -> bool:
    bits, _ = decode_output(raw_forward(state, item.o), inventory)
    return bool((bits == item.y).all())


def batch_terminal_cost(
    W1: np.ndarray, b1: np.ndarray, W2: np.ndarray, b2: np.ndarray,
    O: np.ndarray, Y: np.ndarray, inventory: PhonemeInventory,
) -> float:
    """Fraction of rows of (O, Y) decoded incorrectly by the network."""
    H = _sigmoid(O @ W1.T + b1)
    Y_hat = _sigmoid(H @ W2.T + b2)
    n = len(O)
    pts = Y_hat.reshape(n * N_PHON_SLOTS, N_FEATURES)
    idx = nearest_phoneme_indices(pts, inventory)
    decoded = inventory.features[idx].reshape(n, PHON_DIM)
    return float(1.0 - (decoded == Y).all(axis=1).mean())


def terminal_cost(
    state: LearnerState, test_items: list[WordItem], inventory: PhonemeInventory
) -> float:
    """Fraction of test items mispronounced (any wrong slot counts)."""
    if not test_items:
        raise ValueError("empty test set")
    O = np.stack([it.o for it in test_items])
    Y = np.stack([it.y for it in test_items])
    return batch_terminal_cost(state.W1, state.b1, state.W2, state.b2, O, Y, inventory)


DEFAULT_CRITERIA = {"max_epochs": 2000, "patience": 50, "target_train_acc": 1.0}


def batch_train_to_convergence(
    state: LearnerState,
    pool_items: list[WordItem],
    inventory: PhonemeInventory,
    lr: float = 0.1,
    criteria: dict | None = None,
) -> tuple[LearnerState, int]:
    """Full-batch Nesterov training until the train accuracy plateaus.

    The batch gradient averages the per-item summed cross-entropy over
    the pool; summing instead diverges at the default learning rate.
    Stops at target_train_acc, after `patience` epochs without a new
    best accuracy, or at max_epochs.
    """
    if not pool_items:
        raise ValueError("empty pool")
    crit = dict(DEFAULT_CRITERIA)
    crit.update(criteria or {})
    O = np.stack([it.o for it in pool_items])
    Y = np.stack([it.y for it in pool_items])
    n = len(pool_items)
    mu = state.momentum
    st = state.copy()
    W1, b1, W2, b2 = st.W1, st.b1, st.W2, st.b2
    vW1, vb1, vW2, vb2 = st.vW1, st.vb1, st.vW2, st.vb2
    best_acc, best_epoch = -1.0, 0
    epoch = 0
    while epoch < crit["max_epochs"]:
        H = _sigmoid(O @ (W1 + mu * vW1).T + (b1 + mu * vb1))
        Y_hat = _sigmoid(H @ (W2 + mu * vW2).T + (b2 + mu * vb2))
        D2 = (Y_hat - Y) / n
        gW2, gb2 = D2.T @ H, D2.sum(0)
        DH = (D2 @ (W2 + mu * vW2)) * H * (1.0 - H)
        gW1, gb1 = DH.T @ O, DH.sum(0)
        vW1 = mu * vW1 - lr * gW1
        W1 = W1 + vW1
        vb1 = mu * vb1 - lr * gb1
        b1 = b1 + vb1
        vW2 = mu * vW2 - lr * gW2
        W2 = W2 + vW2
        vb2 = mu * vb2 - lr * gb2
        b2 = b2 + vb2
        epoch += 1
        acc = 1.0 - batch_terminal_cost(W1, b1, W2, b2, O, Y, inventory)
        if acc > best_acc:
            best_acc, best_epoch = acc, epoch
        if acc >= crit["target_train_acc"] or epoch - best_epoch >= crit["patience"]:
            break
    final = replace(
        st, W1=W1, b1=b1, W2=W2, b2=b2, vW1=vW1, vb1=vb1, vW2=vW2, vb2=vb2, lr=lr
    )
    return final, epoch
