"""Seeded Monte Carlo experiments producing CSV tables.

Every random quantity of a trial comes from its own substream of the master
seed: channels from ``(seed, CHANNEL, trial)`` (shared by all sweep points
and schemes, so comparisons are paired), algorithm initialization from
``(seed, INIT, sweep, trial)`` and symbols/noise from
``(seed, LINK, sweep, trial)``. Results are reduced in trial order, so the
output does not depend on the worker count.
"""

import io
import json
import logging
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import NamedTuple

import numpy as np
from threadpoolctl import threadpool_limits

from .. import __version__
from ..channel import SystemConfig, random_channel
from ..errors import ConfigError, InfeasibleSweepPointError
from ..fdbf import fdbf_alternate
from ..hbf import GEVD_MODES, INIT_MODES, AlternateOptions, alternate
from .link import LinkBeamformers, run_link_trial

log = logging.getLogger(__name__)

KINDS = ("ber_vs_snr", "mse_vs_iter", "ber_vs_rf")
SCHEMES = ("hbf", "fdbf")
SWEEP_VARIABLE = {"ber_vs_snr": "snr_db", "mse_vs_iter": "iteration", "ber_vs_rf": "n_tx_rf"}

CHANNEL, INIT, LINK = 0, 1, 2
CHUNK = 25

SNR_CONVENTION = "SNR = power / noise_var; noise_var = power * 10^(-SNR_dB/10); power = 1 unless configured"
STDERR_CONVENTION = "std_error = sample std (ddof=1) / sqrt(n_samples); nan when n_samples = 1"


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    base: SystemConfig
    sweep: tuple
    n_channel_trials: int = 1000
    n_symbol_blocks_per_trial: int = 1000
    seed: int = 0
    schemes: tuple = SCHEMES
    max_iters: int = 100
    stop_tol: float = 1e-6
    ber_target_errors: int = 400
    ber_min_trials: int = 100
    init: str = "channel"
    gevd_mode: str = "reduced"

    def __post_init__(self):
        object.__setattr__(self, "sweep", tuple(self.sweep))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.sweep:
            raise ConfigError("sweep must not be empty")
        for name in ("n_channel_trials", "n_symbol_blocks_per_trial", "max_iters", "ber_min_trials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.ber_target_errors < 0 or self.stop_tol < 0:
            raise ConfigError("ber_target_errors and stop_tol must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not self.schemes or set(self.schemes) - set(SCHEMES):
            raise ConfigError(f"schemes must be a non-empty subset of {SCHEMES}")
        if self.init not in INIT_MODES or self.gevd_mode not in GEVD_MODES:
            raise ConfigError(f"init must be in {INIT_MODES} and gevd_mode in {GEVD_MODES}")
        if self.kind == "mse_vs_iter":
            for value in self.sweep:
                if int(value) != value or value < 0:
                    raise InfeasibleSweepPointError(f"iteration index {value!r}")
        for value in self.sweep:
            self.point_config(value)

    def point_config(self, value):
        """System configuration at one sweep value."""
        try:
            if self.kind == "ber_vs_snr":
                return replace(self.base, noise_var=self.base.power * 10.0 ** (-value / 10.0))
            if self.kind == "ber_vs_rf":
                if int(value) != value:
                    raise ConfigError("n_tx_rf must be an integer")
                return replace(self.base, n_tx_rf=int(value))
            return self.base
        except ConfigError as exc:
            raise InfeasibleSweepPointError(f"sweep value {value!r}: {exc}") from None

    def options(self, max_iters=None):
        return AlternateOptions(
            max_iters=max_iters or self.max_iters,
            stop_tol=self.stop_tol,
            gevd_mode=self.gevd_mode,
            init=self.init,
        )

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown ExperimentSpec fields: {sorted(unknown)}")
        for required in ("kind", "base", "sweep"):
            if required not in data:
                raise ConfigError(f"missing field {required!r}")
        data = dict(data)
        if not isinstance(data["base"], dict):
            raise ConfigError("base must be an object")
        data["base"] = SystemConfig.from_dict(data["base"])
        return cls(**data)

    def to_dict(self):
        out = asdict(self)
        out["sweep"] = list(self.sweep)
        out["schemes"] = list(self.schemes)
        return out


def load_spec(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return ExperimentSpec.from_dict(data)


class Row(NamedTuple):
    scheme: str
    sweep_variable: str
    sweep_value: object
    metric: str
    mean: float
    std_error: float
    n_samples: int


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list = field(default_factory=list)

    def get(self, scheme, metric, sweep_value):
        for row in self.rows:
            if row.scheme == scheme and row.metric == metric and row.sweep_value == sweep_value:
                return row
        raise KeyError((scheme, metric, sweep_value))

    def series(self, scheme, metric):
        return [(r.sweep_value, r.mean) for r in self.rows if r.scheme == scheme and r.metric == metric]

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# hbf-lab {__version__}\n")
        buf.write(f"# kind={self.spec.kind} seed={self.spec.seed}\n")
        buf.write(f"# {SNR_CONVENTION}\n")
        buf.write(f"# {STDERR_CONVENTION}\n")
        buf.write("scheme,sweep_variable,sweep_value,metric,mean,std_error,n_samples\n")
        for r in self.rows:
            buf.write(f"{r.scheme},{r.sweep_variable},{r.sweep_value!r},{r.metric},"
                      f"{r.mean!r},{r.std_error!r},{r.n_samples}\n")
        return buf.getvalue()


def substream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def trial_channel(spec, cfg, trial):
    return random_channel(cfg, substream(spec.seed, CHANNEL, trial))


def _run_scheme(spec, cfg, scheme, channels, sweep_index, trial, max_iters=None):
    options = spec.options(max_iters)
    if scheme == "hbf":
        res = alternate(channels, cfg, substream(spec.seed, INIT, sweep_index, trial), options)
        return res, LinkBeamformers.from_hybrid(res.precoder, res.combiners)
    res = fdbf_alternate(channels, cfg, options)
    return res, LinkBeamformers.from_digital(res.state)


def _ber_trial(args):
    spec, scheme, sweep_index, trial = args
    cfg = spec.point_config(spec.sweep[sweep_index])
    channels = trial_channel(spec, cfg, trial)
    res, bf = _run_scheme(spec, cfg, scheme, channels, sweep_index, trial)
    stats = run_link_trial(channels, bf, cfg, substream(spec.seed, LINK, sweep_index, trial),
                           spec.n_symbol_blocks_per_trial)
    metrics = {
        "ber": stats.bit_errors / stats.bits_sent,
        "sum_mse": res.trace[-1].total,
        "iterations": float(len(res.trace)),
    }
    if scheme == "hbf":
        metrics["orthogonality_gap"] = res.orthogonality_gap
    return stats.bit_errors, metrics


def _mse_trial(args):
    spec, scheme, trial = args
    cfg = spec.base
    channels = trial_channel(spec, cfg, trial)
    last = max(1, int(max(spec.sweep)))
    res, _ = _run_scheme(spec, cfg, scheme, channels, 0, trial, max_iters=last)
    values = [res.initial.total] + [r.total for r in res.trace]
    # converged traces hold their final value
    return [values[min(int(i), len(values) - 1)] for i in spec.sweep]


def _summary(samples):
    x = np.asarray(samples, dtype=float)
    n = x.size
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return float(np.mean(x)), se, n


def _init_worker():
    threadpool_limits(1)


class _Runner:
    """Maps trial tasks over an optional process pool, keeping task order."""

    def __init__(self, workers):
        self.pool = None
        if workers > 1:
            ctx = multiprocessing.get_context("spawn")
            self.pool = ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker)

    def map(self, fn, tasks):
        if self.pool is None:
            return [fn(t) for t in tasks]
        return list(self.pool.map(fn, tasks))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _ber_rows(spec, runner):
    rows = []
    var = SWEEP_VARIABLE[spec.kind]
    floor = min(spec.ber_min_trials, spec.n_channel_trials)
    for si, value in enumerate(spec.sweep):
        for scheme in spec.schemes:
            collected = []
            errors = 0
            done = False
            start = 0
            while not done and start < spec.n_channel_trials:
                stop = min(start + CHUNK, spec.n_channel_trials)
                batch = runner.map(_ber_trial, [(spec, scheme, si, t) for t in range(start, stop)])
                for bit_errors, metrics in batch:
                    collected.append(metrics)
                    errors += bit_errors
                    if len(collected) >= floor and errors >= spec.ber_target_errors:
                        done = True
                        break
                start = stop
            log.info("%s %s=%r: %d trials, %d bit errors", scheme, var, value, len(collected), errors)
            for metric in collected[0]:
                mean, se, n = _summary([m[metric] for m in collected])
                rows.append(Row(scheme, var, value, metric, mean, se, n))
    return rows


def _mse_rows(spec, runner):
    rows = []
    var = SWEEP_VARIABLE[spec.kind]
    for scheme in spec.schemes:
        per_trial = np.array(runner.map(_mse_trial, [(spec, scheme, t) for t in range(spec.n_channel_trials)]))
        log.info("%s: %d trials", scheme, per_trial.shape[0])
        for i, value in enumerate(spec.sweep):
            mean, se, n = _summary(per_trial[:, i])
            rows.append(Row(scheme, var, value, "sum_mse", mean, se, n))
    return rows


def run_experiment(spec, workers=1):
    """Run every (sweep value, scheme) cell of `spec` and tabulate the metrics.

    BER kinds stop a cell early once at least ``ber_min_trials`` trials have
    been run and ``ber_target_errors`` bit errors have been seen; the cut is
    made in trial order, so it is the same for any worker count.
    """
    spec.validate()
    runner = _Runner(workers)
    try:
        with threadpool_limits(1):
            if spec.kind == "mse_vs_iter":
                rows = _mse_rows(spec, runner)
            else:
                rows = _ber_rows(spec, runner)
    finally:
        runner.close()
    return ExperimentResult(spec, rows)
