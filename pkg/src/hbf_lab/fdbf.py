"""Fully digital MMSE beamforming baseline.

Alternates the two exact minimizers of the sum-MSE, the regularized
closed-form precoder (with power normalization through ``beta``) and the
per-user Wiener combiners, so the sum-MSE can only go down.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import SingularSystemError
from .hbf import AlternateOptions, MseReport, user_mse
from .numerics import solve_hpd

# diagonal loading used when noise_var == 0 and the signal covariance is singular
_LOADING = 1e-12


@dataclass
class DigitalBeamformerState:
    precoder: np.ndarray  # (N_t, K*N_s), tr(V V^H) = P
    combiners: list  # K arrays (N_r, N_s)
    beta: float


@dataclass
class FdbfResult:
    state: DigitalBeamformerState
    trace: list
    initial: MseReport
    converged: bool

    def __iter__(self):
        return iter((self.state, self.trace))


def fdbf_precoder(H, combiners, noise_var, power):
    """Unconstrained MMSE precoder ``beta^-1 (H^H W W^H H + lam I)^-1 H^H W``.

    Evaluated in the K*N_s-dimensional form ``H^H W (W^H H H^H W + lam I)^-1``,
    which is the same matrix and stays defined at ``noise_var = 0`` as long
    as ``W^H H`` has full row rank.
    """
    W = sla.block_diag(*combiners)
    lam = noise_var * np.linalg.norm(W) ** 2 / power
    F = W.conj().T @ H
    M = F @ F.conj().T
    M = 0.5 * (M + M.conj().T) + lam * np.eye(M.shape[0])
    try:
        L = sla.cholesky(M, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularSystemError("W^H H H^H W + lam I is singular") from None
    pivots = np.abs(np.diag(L))
    if lam == 0 and pivots.min() ** 2 < 1e-13 * pivots.max() ** 2:
        raise SingularSystemError("noise-free system is numerically singular")
    Vt = F.conj().T @ sla.cho_solve((L, True), np.eye(M.shape[0]), check_finite=False)
    beta = np.linalg.norm(Vt) / np.sqrt(power)
    if beta == 0:
        raise SingularSystemError("effective channel W^H H is zero")
    return Vt / beta, float(beta)


def fdbf_combiners(channels, precoder, beta, noise_var):
    """Per-user Wiener combiners ``beta^-1 (H_k V V^H H_k^H + s2 I)^-1 H_k V_k``."""
    K = len(channels)
    n_streams = precoder.shape[1] // K
    out = []
    for k, Hk in enumerate(channels):
        HV = Hk @ precoder
        C = HV @ HV.conj().T
        C = 0.5 * (C + C.conj().T)
        loading = noise_var if noise_var > 0 else _LOADING * max(1.0, np.trace(C).real / C.shape[0])
        C += loading * np.eye(C.shape[0])
        out.append(solve_hpd(C, HV[:, k * n_streams:(k + 1) * n_streams]) / beta)
    return out


def initial_combiners(cfg, channels):
    """Dominant N_s left singular vectors of each user's channel."""
    return [np.linalg.svd(Hk)[0][:, :cfg.n_streams] for Hk in channels]


def _report(channels, state, cfg, iteration):
    J = user_mse(channels, state.precoder, state.combiners, state.beta, cfg.noise_var, cfg.n_streams)
    return MseReport(per_user=J, total=float(J.sum()), iteration=iteration)


def fdbf_alternate(channels, cfg, options=None):
    """Alternate Wiener combiners and MMSE precoder until the sum-MSE settles.

    Uses the same stop rule as :func:`hbf_lab.hbf.alternate`; only
    ``max_iters`` and ``stop_tol`` of `options` are read.
    """
    options = options or AlternateOptions()
    H = channels.stacked
    W = initial_combiners(cfg, channels)
    V, beta = fdbf_precoder(H, W, cfg.noise_var, cfg.power)
    state = DigitalBeamformerState(V, W, beta)
    initial = _report(channels, state, cfg, 0)

    trace = []
    previous = initial.total
    converged = False
    for it in range(1, options.max_iters + 1):
        W = fdbf_combiners(channels, state.precoder, state.beta, cfg.noise_var)
        V, beta = fdbf_precoder(H, W, cfg.noise_var, cfg.power)
        state = DigitalBeamformerState(V, W, beta)
        report = _report(channels, state, cfg, it)
        trace.append(report)
        if abs(report.total - previous) < options.stop_tol:
            converged = True
            break
        previous = report.total
    return FdbfResult(state, trace, initial, converged)
