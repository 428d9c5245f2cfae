"""Compiled inner loop for sequence training.

The online training loop dominates every experiment (tens of millions
of presentations per optimizer run), so the per-presentation update is
a single numba kernel. Everything else in the package stays in plain
numpy. The kernel exploits the one-hot input structure: only the set
bits of the input touch the first-layer weights, so the forward pass
and the first-layer gradient iterate over at most a handful of columns.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def train_on_sequence(
    W1, b1, W2, b2, vW1, vb1, vW2, vb2, bit_idx, bit_count, Y, seq, lr, mu
):
    """Run Nesterov-momentum updates in place, one per sequence entry.

    bit_idx[k] holds the set-bit positions of item k's input vector
    (padded; bit_count[k] gives the valid prefix), Y[k] its target.
    seq contains item indices. The gradient is taken at the lookahead
    point (w + mu*v) of the summed cross-entropy loss, whose
    output-layer term reduces to (prediction - target).
    """
    n_hidden, n_in = W1.shape
    n_out = W2.shape[0]
    h = np.empty(n_hidden)
    d_out = np.empty(n_out)
    d_hid = np.empty(n_hidden)
    for t in range(seq.shape[0]):
        k = seq[t]
        nb = bit_count[k]
        for i in range(n_hidden):
            s = b1[i] + mu * vb1[i]
            for jj in range(nb):
                j = bit_idx[k, jj]
                s += W1[i, j] + mu * vW1[i, j]
            h[i] = 1.0 / (1.0 + np.exp(-s))
        for i in range(n_out):
            s = b2[i] + mu * vb2[i]
            for j in range(n_hidden):
                s += (W2[i, j] + mu * vW2[i, j]) * h[j]
            d_out[i] = 1.0 / (1.0 + np.exp(-s)) - Y[k, i]
        for j in range(n_hidden):
            s = 0.0
            for i in range(n_out):
                s += (W2[i, j] + mu * vW2[i, j]) * d_out[i]
            d_hid[j] = s * h[j] * (1.0 - h[j])
        for i in range(n_out):
            vb2[i] = mu * vb2[i] - lr * d_out[i]
            b2[i] += vb2[i]
            for j in range(n_hidden):
                vW2[i, j] = mu * vW2[i, j] - lr * d_out[i] * h[j]
                W2[i, j] += vW2[i, j]
        for i in range(n_hidden):
            vb1[i] = mu * vb1[i] - lr * d_hid[i]
            b1[i] += vb1[i]
            for j in range(n_in):
                vW1[i, j] = mu * vW1[i, j]
                W1[i, j] += vW1[i, j]
            for jj in range(nb):
                j = bit_idx[k, jj]
                vW1[i, j] -= lr * d_hid[i]
                W1[i, j] -= lr * d_hid[i]
