"""Multiuser MMSE hybrid beamforming by alternating minimization.

The base station precoder is ``V = V_RF V_D`` with a constant-modulus analog
part; user k combines with ``W_k = W_RF,k W_D,k`` and every user scales its
estimate by the common factor ``beta``. One outer iteration updates

1. the analog precoder, column by column via a generalized eigenproblem,
2. the digital precoder and ``beta`` in closed form,
3. the analog combiners, column by column against a lower bound of the
   sum-MSE,
4. the unitary digital combiners via an SVD,
5. the digital precoder again, so the recorded sum-MSE always belongs to the
   jointly optimal digital precoder for the current analog/combiner state.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import HbfError, SingularSystemError
from .numerics import gevd_max, solve_hpd, svd_thin

GEVD_MODES = ("reduced", "full", "power")
INIT_MODES = ("channel", "random")

_RANK_RTOL = 1e-8
_PIVOT_RTOL = 1e-13


@dataclass
class HybridPrecoder:
    analog: np.ndarray  # (N_t, N_t^RF), unit-modulus entries
    digital: np.ndarray  # (N_t^RF, K*N_s)
    beta: float
    lam: float = 0.0
    eta: float = 0.0

    @property
    def matrix(self):
        return self.analog @ self.digital

    def user_block(self, k, n_streams):
        return self.matrix[:, k * n_streams:(k + 1) * n_streams]


@dataclass
class HybridCombinerSet:
    analog: list  # K arrays (N_r, N_r^RF), unit-modulus entries
    digital: list  # K arrays (N_r^RF, N_s), orthonormal columns

    @property
    def effective(self):
        return [Wa @ Wd for Wa, Wd in zip(self.analog, self.digital)]

    def blockdiag(self):
        return sla.block_diag(*self.effective)


@dataclass
class MseReport:
    per_user: np.ndarray
    total: float
    iteration: int = 0


@dataclass
class AlternateOptions:
    max_iters: int = 100
    stop_tol: float = 1e-6
    gevd_mode: str = "reduced"
    init: str = "channel"

    def __post_init__(self):
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.gevd_mode not in GEVD_MODES:
            raise ValueError(f"gevd_mode must be one of {GEVD_MODES}, got {self.gevd_mode!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class AlternationResult:
    precoder: HybridPrecoder
    combiners: HybridCombinerSet
    trace: list
    initial: MseReport
    converged: bool
    # ||V_RF^H V_RF / N_t - I||_F, how far the analog columns are from orthogonal
    orthogonality_gap: float = field(default=float("nan"))

    def __iter__(self):
        return iter((self.precoder, self.combiners, self.trace))


def phase_extract(v):
    """Project onto the constant-modulus set; zero entries map to phase 0."""
    return np.exp(1j * np.angle(v))


def user_mse(channels, V, combiners, beta, noise_var, n_streams):
    """Per-user MSE for a generic precoder `V` and effective combiners.

    J_k = tr(b^2 W_k^H H_k V V^H H_k^H W_k + b^2 s2 W_k^H W_k + I)
          - 2 Re tr(b V_k^H H_k^H W_k)
    """
    J = np.empty(len(combiners))
    for k, (Hk, Wk) in enumerate(zip(channels, combiners)):
        E = beta * (Wk.conj().T @ Hk @ V)
        own = E[:, k * n_streams:(k + 1) * n_streams]
        J[k] = (
            np.linalg.norm(E) ** 2
            + beta**2 * noise_var * np.linalg.norm(Wk) ** 2
            + n_streams
            - 2.0 * np.trace(own).real
        )
    return J


def sum_mse_direct(channels, precoder, combiners, noise_var):
    """Evaluate the per-user MSE expression literally and sum it."""
    n_streams = combiners.digital[0].shape[1]
    J = user_mse(channels, precoder.matrix, combiners.effective, precoder.beta, noise_var, n_streams)
    return MseReport(per_user=J, total=float(J.sum()))


def _range_basis(V_RF):
    """Orthonormal basis Q of range(V_RF) and the map V_D = pinv(V_RF) Q."""
    U, S, R = svd_thin(V_RF)
    r = int(np.sum(S > S[0] * _RANK_RTOL))
    return U[:, :r], R[:, :r] / S[:r]


def digital_precoder(H, V_RF, W, noise_var, power):
    """Closed-form digital precoder and receive scale for fixed V_RF and W.

    Returns ``(V_D, beta, lam)`` where ``lam = noise_var tr(W^H W) / power``,
    ``V_D = beta^-1 (T^H T + lam V_RF^H V_RF)^-1 T^H`` with ``T = W^H H V_RF``
    and ``beta`` makes ``tr(V_RF V_D V_D^H V_RF^H) = power`` hold exactly.

    Analog columns can become (nearly) parallel when there are more RF chains
    than streams. The normal matrix is then singular although the optimal
    ``V_RF V_D`` is not, so it is computed on an orthonormal basis of
    range(V_RF) and mapped back with the pseudo-inverse of V_RF.
    """
    lam = noise_var * np.linalg.norm(W) ** 2 / power
    F = W.conj().T @ H
    T = F @ V_RF
    M = T.conj().T @ T + lam * (V_RF.conj().T @ V_RF)
    M = 0.5 * (M + M.conj().T)
    try:
        L = sla.cholesky(M, lower=True, check_finite=False)
        pivots = np.abs(np.diag(L))
        well_posed = pivots.min() ** 2 >= _PIVOT_RTOL * pivots.max() ** 2
    except np.linalg.LinAlgError:
        well_posed = False
    if well_posed:
        Vt = sla.cho_solve((L, True), T.conj().T, check_finite=False)
    else:
        Q, to_digital = _range_basis(V_RF)
        FQ = F @ Q
        N = FQ.conj().T @ FQ
        N = 0.5 * (N + N.conj().T) + lam * np.eye(N.shape[0])
        try:
            Lr = sla.cholesky(N, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise SingularSystemError("normal matrix is singular on range(V_RF)") from None
        pivots = np.abs(np.diag(Lr))
        if pivots.min() ** 2 < _PIVOT_RTOL * pivots.max() ** 2:
            raise SingularSystemError("noise-free system is numerically singular")
        Vt = to_digital @ sla.cho_solve((Lr, True), FQ.conj().T, check_finite=False)
    beta = np.linalg.norm(V_RF @ Vt) / np.sqrt(power)
    if beta == 0:
        raise SingularSystemError("effective channel W^H H V_RF is zero")
    return Vt / beta, float(beta), float(lam)


def sum_mse_precoded(H, V_RF, W, lam):
    """Sum-MSE after substituting the optimal digital precoder.

    tr((I + W^H H V_RF (V_RF^H V_RF)^-1 V_RF^H H^H W / lam)^-1), where the
    middle factor is the orthogonal projector onto range(V_RF).
    """
    if not lam > 0:
        raise HbfError(f"lam must be > 0, got {lam}", code="needs-regularization")
    Q, _ = _range_basis(V_RF)
    FQ = W.conj().T @ H @ Q
    M = np.eye(FQ.shape[0]) + (FQ @ FQ.conj().T) / lam
    M = 0.5 * (M + M.conj().T)
    return float(np.trace(solve_hpd(M, np.eye(FQ.shape[0]))).real)


def column_pair(F, A, scale, floor):
    """Matrices of the per-column generalized Rayleigh quotient.

    With ``Y = A^-1 F`` this returns ``B = scale Y^H Y`` (= scale F^H A^-2 F)
    and ``D = floor I + scale F^H Y`` (= floor I + scale F^H A^-1 F).
    """
    Y = solve_hpd(A, F)
    B = scale * (Y.conj().T @ Y)
    D = scale * (F.conj().T @ Y)
    D = 0.5 * (D + D.conj().T) + floor * np.eye(F.shape[1])
    return 0.5 * (B + B.conj().T), D


class _ColumnSolver:
    """Top generalized eigenvector of (scale F^H A^-2 F, floor I + scale F^H A^-1 F).

    In ``"reduced"`` mode the problem is restricted to the row space of F,
    which contains the maximizer: a component orthogonal to it adds to the
    denominator only. For a wide F this shrinks the eigenproblem from
    F.shape[1] to rank(F).
    """

    def __init__(self, F, scale, floor, mode):
        self.F = F
        self.scale = scale
        self.floor = floor
        self.mode = mode
        self.basis = None
        if mode == "reduced" and F.shape[0] < F.shape[1]:
            U, S, R = svd_thin(F)
            rank = int(np.sum(S > S[0] * 1e-12)) if S.size and S[0] > 0 else 0
            if 0 < rank < F.shape[1]:
                self.basis = R[:, :rank]
                self.F_red = U[:, :rank] * S[:rank]

    def solve(self, A):
        if self.basis is not None:
            B, D = column_pair(self.F_red, A, self.scale, self.floor)
            return self.basis @ gevd_max(B, D).vector
        B, D = column_pair(self.F, A, self.scale, self.floor)
        method = "power" if self.mode == "power" else "eigh"
        return gevd_max(B, D, method=method).vector


def analog_precoder_sweep(H, V_RF, W, eta, mode="reduced"):
    """One column pass over the analog precoder.

    Column j is replaced by the phase of the top generalized eigenvector of
    ``(B_t,j, D_t,j)`` before column j + 1 is optimized. Returns a new array.
    """
    if not eta > 0:
        raise HbfError(f"eta must be > 0, got {eta}", code="needs-regularization")
    V = np.array(V_RF, dtype=complex)
    n_tx, n_rf = V.shape
    F = W.conj().T @ H
    T = F @ V
    solver = _ColumnSolver(F, 1.0 / eta, 1.0 / n_tx, mode)
    for j in range(n_rf):
        Tbar = np.delete(T, j, axis=1)
        A = np.eye(F.shape[0]) + (Tbar @ Tbar.conj().T) / eta
        V[:, j] = phase_extract(solver.solve(A))
        T[:, j] = F @ V[:, j]
    return V


def digital_combiners(channels, V_RF, V_D, beta, analog):
    """Unitary digital combiners ``W_D,k = R_1 U^H`` from ``G_k = U S R_1^H``."""
    K = len(analog)
    n_streams = V_D.shape[1] // K
    out = []
    for k in range(K):
        Vk = V_RF @ V_D[:, k * n_streams:(k + 1) * n_streams]
        G = beta * (analog[k].conj().T @ channels[k] @ Vk).conj().T
        U, _, R = svd_thin(G)
        out.append(R @ U.conj().T)
    return out


def analog_combiner_sweep(channels, V_RF, analog, eta_r, mode="reduced"):
    """One column pass over every user's analog combiner.

    Minimizes the lower bound tr((sum_f Hb_f^H W_RF,f W_RF,f^H Hb_f + eta_r I)^-1)
    with ``Hb_f = H_f V_RF``. Users are visited in order and updates are
    visible to the users that follow.
    """
    if not eta_r > 0:
        raise HbfError(f"eta_r must be > 0, got {eta_r}", code="needs-regularization")
    Hb = [Hk @ V_RF for Hk in channels]
    W = [np.array(Wk, dtype=complex) for Wk in analog]
    n_rf = V_RF.shape[1]
    n_rx = W[0].shape[0]
    P = [Wk.conj().T @ Hbk for Wk, Hbk in zip(W, Hb)]  # rows are w^H Hb_k
    total = sum(Pk.conj().T @ Pk for Pk in P)
    for k in range(len(W)):
        solver = _ColumnSolver(Hb[k].conj().T, 1.0, 1.0 / n_rx, mode)
        for j in range(W[k].shape[1]):
            row = P[k][j]
            A = total - np.outer(row.conj(), row) + eta_r * np.eye(n_rf)
            A = 0.5 * (A + A.conj().T)
            W[k][:, j] = phase_extract(solver.solve(A))
            new_row = W[k][:, j].conj() @ Hb[k]
            total = total - np.outer(row.conj(), row) + np.outer(new_row.conj(), new_row)
            P[k][j] = new_row
    return W


def random_analog(rng, shape):
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, shape))


def initial_state(cfg, rng, channels=None, mode="random"):
    """Starting analog matrices plus identity-prefix digital combiners.

    ``"random"`` draws i.i.d. uniform phases from `rng`. ``"channel"`` takes
    the phases of the dominant right singular vectors of the stacked channel
    for V_RF and of the dominant left singular vectors of H_k for W_RF,k.
    """
    W_D = [np.eye(cfg.n_rx_rf, cfg.n_streams, dtype=complex) for _ in range(cfg.n_users)]
    if mode == "random":
        V_RF = random_analog(rng, (cfg.n_tx, cfg.n_tx_rf))
        W_RF = [random_analog(rng, (cfg.n_rx, cfg.n_rx_rf)) for _ in range(cfg.n_users)]
        return V_RF, HybridCombinerSet(W_RF, W_D)
    if mode != "channel" or channels is None:
        raise ValueError(f"cannot build {mode!r} initial state")
    # full_matrices so n_tx_rf may exceed the rank of H
    _, _, Rh = np.linalg.svd(channels.stacked)
    V_RF = phase_extract(Rh[:cfg.n_tx_rf].conj().T)
    W_RF = [phase_extract(np.linalg.svd(Hk)[0][:, :cfg.n_rx_rf]) for Hk in channels]
    return V_RF, HybridCombinerSet(W_RF, W_D)


def _precoder(channels, V_RF, comb, cfg):
    V_D, beta, lam = digital_precoder(channels.stacked, V_RF, comb.blockdiag(), cfg.noise_var, cfg.power)
    return HybridPrecoder(V_RF, V_D, beta, lam, cfg.n_tx * lam)


def alternate(channels, cfg, rng, options=None):
    """Run the alternating HBF optimization until the sum-MSE settles.

    Stops when two consecutive sum-MSE values differ by less than
    ``options.stop_tol`` or after ``options.max_iters`` outer iterations;
    hitting the cap is reported through ``converged=False``, not raised.
    The first iteration is compared with the sum-MSE of the initial state
    (kept in ``result.initial``). `rng` is only consumed by ``init="random"``.
    """
    options = options or AlternateOptions()
    H = channels.stacked
    V_RF, comb = initial_state(cfg, rng, channels, options.init)
    prec = _precoder(channels, V_RF, comb, cfg)
    initial = sum_mse_direct(channels, prec, comb, cfg.noise_var)
    eta_r = cfg.n_tx * cfg.noise_var * cfg.n_users * cfg.n_rx * cfg.n_streams / cfg.power

    trace = []
    previous = initial.total
    converged = False
    for it in range(1, options.max_iters + 1):
        V_RF = analog_precoder_sweep(H, V_RF, comb.blockdiag(), prec.eta, options.gevd_mode)
        prec = _precoder(channels, V_RF, comb, cfg)
        W_RF = analog_combiner_sweep(channels, V_RF, comb.analog, eta_r, options.gevd_mode)
        W_D = digital_combiners(channels, V_RF, prec.digital, prec.beta, W_RF)
        comb = HybridCombinerSet(W_RF, W_D)
        prec = _precoder(channels, V_RF, comb, cfg)
        report = sum_mse_direct(channels, prec, comb, cfg.noise_var)
        report.iteration = it
        trace.append(report)
        if abs(report.total - previous) < options.stop_tol:
            converged = True
            break
        previous = report.total

    gap = np.linalg.norm(V_RF.conj().T @ V_RF / cfg.n_tx - np.eye(cfg.n_tx_rf))
    return AlternationResult(prec, comb, trace, initial, converged, float(gap))
