import json

import numpy as np
import pytest

from hbf_lab.channel import SystemConfig, channel_from_json, random_channel
from hbf_lab.errors import ConfigError, HbfError, InfeasibleSweepPointError
from hbf_lab.fdbf import fdbf_alternate
from hbf_lab.hbf import alternate, sum_mse_direct
from hbf_lab.simlab import (
    ExperimentSpec,
    LinkBeamformers,
    load_spec,
    qpsk_demodulate,
    qpsk_modulate,
    run_experiment,
    run_link_trial,
)
from hbf_lab.simlab.cli import main

TINY = dict(n_tx=16, n_rx=4, n_tx_rf=4, n_rx_rf=2, n_users=2, n_streams=1, n_paths=6)


class TestQpsk:
    def test_mapping(self):
        s = qpsk_modulate([0, 0, 0, 1, 1, 0, 1, 1])
        np.testing.assert_allclose(s, np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2))

    def test_unit_modulus_and_energy(self, rng):
        s = qpsk_modulate(rng.integers(0, 2, 20000))
        np.testing.assert_allclose(np.abs(s), 1.0)
        assert abs(np.mean(s)) < 0.02

    def test_odd_bits(self):
        with pytest.raises(HbfError, match="odd-bits"):
            qpsk_modulate([0, 1, 1])

    def test_round_trip(self, rng):
        for _ in range(10_000):
            bits = rng.integers(0, 2, 2 * int(rng.integers(1, 9)))
            np.testing.assert_array_equal(qpsk_demodulate(qpsk_modulate(bits)), bits)

    def test_axis_tie_decides_zero(self):
        np.testing.assert_array_equal(qpsk_demodulate([0.0 + 0.0j, 0.0 - 1j, -1 + 0j]), [0, 0, 0, 1, 1, 0])

    def test_conjugate_flips_second_bit(self, rng):
        bits = rng.integers(0, 2, 400)
        flipped = qpsk_demodulate(np.conj(qpsk_modulate(bits))).reshape(-1, 2)
        np.testing.assert_array_equal(flipped[:, 0], bits.reshape(-1, 2)[:, 0])
        np.testing.assert_array_equal(flipped[:, 1], 1 - bits.reshape(-1, 2)[:, 1])


class TestLinkTrial:
    def test_noiseless_fdbf_is_error_free(self):
        cfg = SystemConfig(**{**TINY, "noise_var": 0.0, "power": 100.0})
        ch = random_channel(cfg, np.random.default_rng(0))
        res = fdbf_alternate(ch, cfg)
        stats = run_link_trial(ch, LinkBeamformers.from_digital(res.state), cfg, np.random.default_rng(1), 2000)
        assert stats.bit_errors == 0
        assert stats.bits_sent == 2000 * 2 * 2

    def test_errors_bounded(self):
        cfg = SystemConfig(**{**TINY, "noise_var": 100.0})
        ch = random_channel(cfg, np.random.default_rng(0))
        res = alternate(ch, cfg, None)
        stats = run_link_trial(ch, LinkBeamformers.from_hybrid(res.precoder, res.combiners), cfg,
                               np.random.default_rng(2), 500)
        assert 0 < stats.bit_errors <= stats.bits_sent

    @pytest.mark.parametrize("scheme", ["hbf", "fdbf"])
    def test_empirical_mse_matches_closed_form(self, scheme):
        cfg = SystemConfig(**{**TINY, "noise_var": 0.5})
        ch = random_channel(cfg, np.random.default_rng(5))
        if scheme == "hbf":
            res = alternate(ch, cfg, None)
            bf = LinkBeamformers.from_hybrid(res.precoder, res.combiners)
            closed = sum_mse_direct(ch, res.precoder, res.combiners, cfg.noise_var).total
        else:
            res = fdbf_alternate(ch, cfg)
            bf = LinkBeamformers.from_digital(res.state)
            closed = res.trace[-1].total
        stats = run_link_trial(ch, bf, cfg, np.random.default_rng(6), 100_000)
        assert stats.per_user_mse.sum() == pytest.approx(closed, rel=0.02)


def tiny_spec(**kw):
    base = SystemConfig(**TINY)
    args = dict(kind="ber_vs_snr", base=base, sweep=[-4, 0, 4], n_channel_trials=6,
                n_symbol_blocks_per_trial=50, seed=11, ber_min_trials=3, ber_target_errors=10)
    args.update(kw)
    return ExperimentSpec(**args)


class TestExperimentSpec:
    def test_infeasible_rf_point(self):
        with pytest.raises(InfeasibleSweepPointError, match="infeasible-sweep-point.*1"):
            tiny_spec(kind="ber_vs_rf", sweep=[4, 1])

    def test_bad_fields(self):
        with pytest.raises(ConfigError):
            tiny_spec(kind="mse_vs_snr")
        with pytest.raises(ConfigError):
            tiny_spec(sweep=[])
        with pytest.raises(ConfigError):
            tiny_spec(schemes=["omp"])
        with pytest.raises(ConfigError):
            tiny_spec(n_channel_trials=0)
        with pytest.raises(ConfigError):
            tiny_spec(kind="mse_vs_iter", sweep=[1.5])

    def test_dict_round_trip_and_unknown_fields(self, tmp_path):
        spec = tiny_spec()
        data = spec.to_dict()
        assert ExperimentSpec.from_dict(json.loads(json.dumps(data))) == spec
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentSpec.from_dict({**data, "extra": 1})
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentSpec.from_dict({**data, "base": {**data["base"], "nt": 4}})
        path = tmp_path / "c.json"
        path.write_text(json.dumps(data))
        assert load_spec(path) == spec

    def test_snr_convention(self):
        spec = tiny_spec(base=SystemConfig(**TINY, power=1.0))
        assert spec.point_config(-4).noise_var == pytest.approx(10 ** 0.4)
        assert spec.point_config(0).noise_var == 1.0


class TestRunExperiment:
    def test_ber_rows_cover_sweep(self):
        res = run_experiment(tiny_spec())
        for scheme in ("hbf", "fdbf"):
            assert [v for v, _ in res.series(scheme, "ber")] == [-4, 0, 4]
            for v in (-4, 0, 4):
                row = res.get(scheme, "ber", v)
                assert 3 <= row.n_samples <= 6
                assert 0 <= row.mean <= 1
        keys = [(r.scheme, r.sweep_value, r.metric) for r in res.rows]
        assert len(keys) == len(set(keys))

    def test_adaptive_stop_uses_floor(self):
        res = run_experiment(tiny_spec(sweep=[-10], ber_target_errors=1, n_channel_trials=40, ber_min_trials=3))
        assert res.get("hbf", "ber", -10).n_samples == 3

    def test_mse_vs_iter_padding(self):
        spec = tiny_spec(kind="mse_vs_iter", sweep=[0, 1, 2, 5, 200], n_channel_trials=4)
        res = run_experiment(spec)
        for scheme in ("hbf", "fdbf"):
            values = dict(res.series(scheme, "sum_mse"))
            assert values[0] >= values[1] - 1e-9 if scheme == "fdbf" else True
            assert res.get(scheme, "sum_mse", 200).n_samples == 4
        # FDBF converges well before 200 iterations, so the tail is padded
        fd = [alternate_total for _, alternate_total in res.series("fdbf", "sum_mse")]
        assert fd == sorted(fd, reverse=True)

    def test_hbf_descends_on_average(self):
        spec = tiny_spec(kind="mse_vs_iter", sweep=[1, 10], n_channel_trials=200, schemes=["hbf"],
                         base=SystemConfig(**{**TINY, "noise_var": 1.0}))
        res = run_experiment(spec)
        assert res.get("hbf", "sum_mse", 1).mean >= res.get("hbf", "sum_mse", 10).mean

    def test_csv_layout(self):
        csv = run_experiment(tiny_spec(sweep=[0], schemes=["fdbf"])).to_csv()
        lines = csv.splitlines()
        assert lines[0].startswith("# hbf-lab ")
        assert "seed=11" in lines[1]
        assert "SNR" in lines[2] and "std_error" in lines[3]
        assert lines[4] == "scheme,sweep_variable,sweep_value,metric,mean,std_error,n_samples"
        assert lines[5].startswith("fdbf,snr_db,0,ber,")

    def test_workers_do_not_change_output(self):
        spec = tiny_spec(sweep=[-4, 0], n_channel_trials=4, ber_min_trials=4)
        assert run_experiment(spec, workers=1).to_csv() == run_experiment(spec, workers=3).to_csv()


class TestCli:
    def write_config(self, tmp_path, **kw):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(tiny_spec(**kw).to_dict()))
        return path

    def test_run(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, sweep=[0], n_channel_trials=3, ber_min_trials=3)
        out = tmp_path / "out.csv"
        assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
        text = out.read_text()
        assert "seed=5" in text and "hbf,snr_db,0,ber," in text

    def test_validate(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        assert main(["validate", "--config", str(cfg)]) == 0
        assert "ok" in capsys.readouterr().out
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({**tiny_spec().to_dict(), "colour": "red"}))
        assert main(["validate", "--config", str(bad)]) == 1
        assert "unknown" in capsys.readouterr().err

    def test_dump_channel(self, tmp_path):
        cfg_path = self.write_config(tmp_path)
        out = tmp_path / "ch.json"
        assert main(["dump-channel", "--config", str(cfg_path), "--out", str(out)]) == 0
        cfg, ch = channel_from_json(out.read_text())
        spec = load_spec(cfg_path)
        assert cfg == spec.base
        from hbf_lab.simlab.experiment import trial_channel
        np.testing.assert_array_equal(ch.per_user, trial_channel(spec, spec.base, 0).per_user)
