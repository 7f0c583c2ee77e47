"""Narrowband geometric mmWave channel with uniform linear arrays."""

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, power and noise of a downlink multiuser link.

    ``power`` and ``noise_var`` are linear; ``antenna_spacing_wavelengths``
    is d / lambda_c.
    """

    n_tx: int = 256
    n_rx: int = 16
    n_tx_rf: int = 16
    n_rx_rf: int = 2
    n_users: int = 8
    n_streams: int = 2
    power: float = 1.0
    noise_var: float = 1.0
    n_paths: int = 20
    antenna_spacing_wavelengths: float = 0.5

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("n_tx", "n_rx", "n_tx_rf", "n_rx_rf", "n_users", "n_streams", "n_paths"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if not self.n_users * self.n_streams <= self.n_tx_rf <= self.n_tx:
            raise ConfigError(
                f"need n_users*n_streams <= n_tx_rf <= n_tx, got "
                f"{self.n_users}*{self.n_streams}, {self.n_tx_rf}, {self.n_tx}"
            )
        if not self.n_streams <= self.n_rx_rf <= self.n_rx:
            raise ConfigError(
                f"need n_streams <= n_rx_rf <= n_rx, got "
                f"{self.n_streams}, {self.n_rx_rf}, {self.n_rx}"
            )
        if not self.power > 0:
            raise ConfigError(f"power must be > 0, got {self.power}")
        if not self.noise_var >= 0:
            raise ConfigError(f"noise_var must be >= 0, got {self.noise_var}")
        if not self.antenna_spacing_wavelengths > 0:
            raise ConfigError("antenna_spacing_wavelengths must be > 0")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown SystemConfig fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PathSet:
    """Per-user path parameters, each array of shape (n_users, n_paths)."""

    gains: np.ndarray
    aod: np.ndarray
    aoa: np.ndarray


@dataclass(frozen=True)
class ChannelSet:
    """K per-user channels stored as one (K, N_r, N_t) array."""

    per_user: np.ndarray

    @property
    def n_users(self):
        return self.per_user.shape[0]

    @property
    def stacked(self):
        """H = [H_1^T, ..., H_K^T]^T of shape (K*N_r, N_t)."""
        K, n_rx, n_tx = self.per_user.shape
        return self.per_user.reshape(K * n_rx, n_tx)

    def __getitem__(self, k):
        return self.per_user[k]

    def __iter__(self):
        return iter(self.per_user)

    def __len__(self):
        return self.per_user.shape[0]


def steering_matrix(n_antennas, angles, spacing=0.5):
    """ULA responses for several angles, one column per angle."""
    m = np.arange(n_antennas)[:, None]
    phase = 2 * np.pi * spacing * m * np.sin(np.atleast_1d(angles))[None, :]
    return np.exp(1j * phase) / np.sqrt(n_antennas)


def array_response(n_antennas, angle, spacing=0.5):
    """Unit-norm ULA steering vector a(angle) of length `n_antennas`."""
    if n_antennas < 1:
        raise ConfigError(f"n_antennas must be >= 1, got {n_antennas}")
    return steering_matrix(n_antennas, angle, spacing)[:, 0]


def draw_paths(cfg, rng):
    """Draw CN(0, 1) path gains and uniform [0, 2pi) AoD/AoA for every user.

    Each user gets an independent child stream spawned from `rng`, so a
    user's paths do not depend on how many values other users consumed.
    """
    K, L = cfg.n_users, cfg.n_paths
    gains = np.empty((K, L), dtype=complex)
    aod = np.empty((K, L))
    aoa = np.empty((K, L))
    for k, sub in enumerate(rng.spawn(K)):
        z = sub.standard_normal((2, L))
        gains[k] = (z[0] + 1j * z[1]) / np.sqrt(2)
        aod[k] = sub.uniform(0.0, 2 * np.pi, L)
        aoa[k] = sub.uniform(0.0, 2 * np.pi, L)
    return PathSet(gains=gains, aod=aod, aoa=aoa)


def build_channel(cfg, paths):
    """H_k = sqrt(N_t N_r / L) * sum_l alpha_lk a_r(aoa_lk) a_t(aod_lk)^H."""
    n_t, n_r, L = cfg.n_tx, cfg.n_rx, cfg.n_paths
    d = cfg.antenna_spacing_wavelengths
    if paths.gains.shape != (cfg.n_users, L):
        raise ConfigError(f"path set shape {paths.gains.shape} does not match config")
    H = np.empty((cfg.n_users, n_r, n_t), dtype=complex)
    gain = np.sqrt(n_t * n_r / L)
    for k in range(cfg.n_users):
        Ar = steering_matrix(n_r, paths.aoa[k], d)
        At = steering_matrix(n_t, paths.aod[k], d)
        H[k] = gain * (Ar * paths.gains[k]) @ At.conj().T
    return ChannelSet(H)


def random_channel(cfg, rng):
    return build_channel(cfg, draw_paths(cfg, rng))


def channel_to_json(cfg, channels):
    """Serialize config and channel matrices; entries become [re, im] pairs."""
    mats = [
        [[[float(z.real), float(z.imag)] for z in row] for row in Hk]
        for Hk in channels.per_user
    ]
    return json.dumps({"config": cfg.to_dict(), "channels": mats})


def channel_from_json(text):
    data = json.loads(text)
    cfg = SystemConfig.from_dict(data["config"])
    arr = np.asarray(data["channels"], dtype=float)
    H = arr[..., 0] + 1j * arr[..., 1]
    expected = (cfg.n_users, cfg.n_rx, cfg.n_tx)
    if H.shape != expected:
        raise ConfigError(f"channel array shape {H.shape}, expected {expected}")
    return cfg, ChannelSet(H)
