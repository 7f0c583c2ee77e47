"""QPSK link-level simulation over a fixed channel and beamformer set."""

from typing import NamedTuple

import numpy as np

from .modulation import qpsk_demodulate, qpsk_modulate


class LinkBeamformers(NamedTuple):
    """Linear transceiver: precoder V (N_t, K*N_s), combiners W_k (N_r, N_s), scale beta."""

    precoder: np.ndarray
    combiners: list
    beta: float

    @classmethod
    def from_hybrid(cls, precoder, combiners):
        return cls(precoder.matrix, combiners.effective, precoder.beta)

    @classmethod
    def from_digital(cls, state):
        return cls(state.precoder, state.combiners, state.beta)


class LinkStats(NamedTuple):
    bit_errors: int
    bits_sent: int
    per_user_mse: np.ndarray  # mean of ||s_k - s_hat_k||^2 over the blocks


def run_link_trial(channels, beamformers, cfg, rng, n_blocks=1000):
    """Send `n_blocks` random QPSK symbol vectors and count bit errors.

    Each block forms ``x = V s``, ``y_k = H_k x + e_k`` with
    ``e_k ~ CN(0, noise_var I)`` and estimates ``s_hat_k = beta W_k^H y_k``.
    """
    V, W, beta = beamformers
    K, n_s = cfg.n_users, cfg.n_streams
    bits = rng.integers(0, 2, size=(n_blocks, K * n_s * 2), dtype=np.int8)
    s = qpsk_modulate(bits).reshape(n_blocks, K * n_s).T
    x = V @ s
    sigma = np.sqrt(cfg.noise_var / 2.0)

    errors = 0
    mse = np.empty(K)
    for k in range(K):
        noise = sigma * (rng.standard_normal((cfg.n_rx, n_blocks)) + 1j * rng.standard_normal((cfg.n_rx, n_blocks)))
        y = channels[k] @ x + noise
        s_hat = beta * (W[k].conj().T @ y)
        s_k = s[k * n_s:(k + 1) * n_s]
        mse[k] = np.mean(np.sum(np.abs(s_k - s_hat) ** 2, axis=0))
        sent = bits[:, k * 2 * n_s:(k + 1) * 2 * n_s]
        decided = qpsk_demodulate(s_hat.T).reshape(n_blocks, 2 * n_s)
        errors += int(np.count_nonzero(decided != sent))
    return LinkStats(errors, bits.size, mse)
