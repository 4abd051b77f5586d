"""Harness tests: config parsing, emission determinism, runners, CLI."""

import subprocess
import sys

import numpy as np
import pytest

from sparsegp.errors import ConfigError, DenseLimitExceededError
from sparsegp.harness import PlotSpec, config, emit, runners

SMOKE_CONFIG = """
[defaults]
kernel = se
variance = 1.0
noise_variance = 0.1

[experiment:smoke]
kind = fixed-m
lengthscale = 0.4
density = uniform
density_lower = 0.0
density_upper = 5.0
n_grid = 40 80
m_rule = fixed
m = 8
method = points-kdpp
chain_steps = 200
seeds = 0 1
out_csv = smoke.csv
out_svg = smoke.svg
"""


class TestConfigParsing:
    def test_parse_and_defaults_merge(self):
        cfgs = config.parse_config_text(SMOKE_CONFIG)
        assert len(cfgs) == 1
        cfg = cfgs[0]
        assert cfg.name == "smoke"
        assert cfg.kernel.variance == 1.0
        assert cfg.noise.variance == 0.1
        assert cfg.n_grid == [40, 80]
        assert cfg.seeds == [0, 1]
        assert cfg.chain_steps == 200

    def test_seed_range_syntax(self):
        cfgs = config.parse_config_text(
            SMOKE_CONFIG.replace("seeds = 0 1", "seeds = 3:6")
        )
        assert cfgs[0].seeds == [3, 4, 5]

    def test_duplicate_seeds_rejected(self):
        with pytest.raises(ConfigError):
            config.parse_config_text(SMOKE_CONFIG.replace("seeds = 0 1", "seeds = 2 2"))

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigError):
            config.parse_config_text(
                SMOKE_CONFIG.replace("method = points-kdpp", "method = magic")
            )

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            config.parse_config_text(SMOKE_CONFIG + "\n[stray]\nx = 1\n")

    def test_m_sweep_needs_grid(self):
        text = SMOKE_CONFIG.replace("kind = fixed-m", "kind = m-sweep")
        with pytest.raises(ConfigError):
            config.parse_config_text(text)

    def test_builtin_defaults_parse(self):
        for kind in config.DEFAULT_CONFIGS:
            cfg = config.default_config(kind)
            assert cfg.kind == kind

    def test_m_rules(self):
        cfg = config.parse_config_text(SMOKE_CONFIG)[0]
        assert cfg.m_rule.resolve(40, cfg) == 8
        log_rule = config.MRule("log", coeff=2.0, intercept=1.0)
        assert log_rule.resolve(100, cfg) == int(np.ceil(2.0 * np.log(100) + 1.0))
        pow_rule = config.MRule("power", alpha=0.5)
        assert pow_rule.resolve(100, cfg) == 10


class TestCsvEmission:
    def _rows(self):
        cfg = config.parse_config_text(SMOKE_CONFIG)[0]
        return runners.run_fixed_m(cfg, dense_limit=500)

    def test_round_trip_exact(self, tmp_path):
        rows = self._rows()
        path = tmp_path / "rows.csv"
        emit.emit_csv(rows, str(path))
        assert emit.parse_csv(str(path)) == rows

    def test_byte_determinism(self, tmp_path):
        rows = self._rows()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit.emit_csv(rows, str(p1))
        emit.emit_csv(self._rows(), str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_only_for_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit.emit_csv([], str(path))
        content = path.read_text()
        assert content == ",".join(emit.CSV_COLUMNS) + "\n"

    def test_rows_sorted(self):
        rows = self._rows()
        keys = [(r.experiment, r.seed, r.n, r.m) for r in rows]
        assert keys == sorted(keys)

    def test_none_fields_round_trip(self, tmp_path):
        rows = self._rows()
        rows[0].thm1 = None
        path = tmp_path / "none.csv"
        emit.emit_csv(rows, str(path))
        assert emit.parse_csv(str(path))[0].thm1 is None


class TestSvgEmission:
    def test_deterministic_bytes_and_structure(self, tmp_path):
        cfg = config.parse_config_text(SMOKE_CONFIG)[0]
        rows = runners.run_fixed_m(cfg, dense_limit=500)
        spec = PlotSpec(x="n", ys=("kl_exact", "lemma2_lo", "lemma2_hi"), title="smoke")
        s1 = emit.render_svg(rows, spec)
        s2 = emit.render_svg(list(rows), spec)
        assert s1 == s2
        assert s1.startswith("<svg")
        assert s1.count("<polyline") == 3
        assert "kl_exact" in s1
        p = tmp_path / "plot.svg"
        emit.emit_svg(rows, spec, str(p))
        assert p.read_text() == s1

    def test_empty_rows_still_valid_svg(self):
        s = emit.render_svg([], PlotSpec(x="n", ys=("kl_exact",), title="empty"))
        assert s.startswith("<svg") and s.rstrip().endswith("</svg>")


class TestRunners:
    def test_fixed_m_rows_have_apriori_slots(self):
        cfg = config.parse_config_text(SMOKE_CONFIG)[0]
        rows = runners.run_fixed_m(cfg, dense_limit=500)
        assert len(rows) == 4
        for r in rows:
            assert r.violation == ""
            assert r.lemma1 is not None and r.lemma2_lo is not None
            assert r.kl_exact is not None and r.kl_exact <= r.lemma1 + 1e-8
            assert r.lemma2_hi == pytest.approx(2 * r.lemma2_lo)
            # uniform density: no closed-form operator tail
            assert r.thm1 is None

    def test_gaussian_density_fills_theorem_slots(self):
        text = SMOKE_CONFIG.replace(
            "density = uniform", "density = gaussian"
        ).replace("lengthscale = 0.4", "lengthscale = 0.6")
        cfg = config.parse_config_text(text)[0]
        rows = runners.run_fixed_m(cfg, dense_limit=500)
        for r in rows:
            assert r.thm1 is not None and r.thm4 is not None
            assert r.thm3 >= (r.m + 1) * r.thm1 - 1e-9

    def test_dense_limit_enforced(self):
        cfg = config.parse_config_text(SMOKE_CONFIG)[0]
        with pytest.raises(DenseLimitExceededError):
            runners.run_fixed_m(cfg, dense_limit=50)

    def test_determinism_across_runs(self):
        cfg = config.parse_config_text(SMOKE_CONFIG)[0]
        assert runners.run_fixed_m(cfg, dense_limit=500) == runners.run_fixed_m(
            cfg, dense_limit=500
        )

    def test_m_sweep_monotone_kl_for_eigvec(self):
        text = """
[experiment:sweep]
kind = m-sweep
kernel = se
variance = 1.0
lengthscale = 0.6
density = gaussian
noise_variance = 1.0
n_grid = 120
m_grid = 2 5 10 20
m_rule = fixed
m = 2
method = eigvec
seeds = 0 1 2
"""
        cfg = config.parse_config_text(text)[0]
        rows = runners.run_m_sweep(cfg, dense_limit=500)
        for seed in (0, 1, 2):
            kls = [r.kl_exact for r in rows if r.seed == seed]
            assert all(a >= b - 1e-8 for a, b in zip(kls, kls[1:]))

    def test_m_sweep_bound_ordering_monte_carlo(self):
        # kl <= (upper - elbo) holds deterministically row by row; the
        # a-priori theorem bound dominates the a-posteriori gap in well over
        # the 1 - delta fraction of seeds it is guaranteed for.
        text = """
[experiment:sweep]
kind = m-sweep
kernel = se
variance = 1.0
lengthscale = 0.6
density = gaussian
noise_variance = 1.0
n_grid = 200
m_grid = 3 8 15
m_rule = fixed
m = 3
method = points-kdpp
chain_steps = 300
delta = 0.5
seeds = 0:20
"""
        cfg = config.parse_config_text(text)[0]
        rows = runners.run_m_sweep(cfg, dense_limit=500)
        held = 0
        for r in rows:
            assert r.kl_exact <= r.upper - r.elbo + 1e-8
            if r.upper - r.elbo <= r.thm3:
                held += 1
        assert held >= 0.5 * len(rows)


class TestDispersionDemo:
    def test_spread_ordering_over_seeds(self):
        text = """
[experiment:spread]
kind = dispersion
kernel = se
variance = 1.0
lengthscale = 1.0
density = gaussian
noise_variance = 1.0
n_grid = 100
m_rule = fixed
m = 10
method = points-kdpp
chain_steps = 1200
seeds = 0:100
dispersion_lengthscales = 2.0 0.5
"""
        cfg = config.parse_config_text(text)[0]
        lines, nn = runners.run_dispersion_demo(cfg)
        assert len(lines) == 300
        assert nn["kdpp-ell=2"] >= nn["kdpp-ell=0.5"] >= nn["uniform"]

    def test_selections_have_no_duplicates(self):
        text = """
[experiment:spread]
kind = dispersion
kernel = se
variance = 1.0
lengthscale = 1.0
density = gaussian
noise_variance = 1.0
n_grid = 60
m_rule = fixed
m = 8
method = points-kdpp
chain_steps = 300
seeds = 0:5
"""
        cfg = config.parse_config_text(text)[0]
        lines, _ = runners.run_dispersion_demo(cfg)
        for line in lines:
            idx = [int(tok) for tok in line.split(",")[3].split()]
            assert len(idx) == len(set(idx)) == 8


class TestCli:
    def _run(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "sparsegp.harness.cli", *args],
            capture_output=True,
            text=True,
        )

    def test_usage_error_exit_2(self):
        assert self._run().returncode == 2
        assert self._run("no-such-command").returncode == 2

    def test_missing_config_exit_2(self):
        res = self._run("fixed-m", "--config", "/does/not/exist.cfg")
        assert res.returncode == 2

    def test_smoke_run_exit_0(self, tmp_path):
        cfg_path = tmp_path / "smoke.cfg"
        cfg_path.write_text(SMOKE_CONFIG)
        res = self._run(
            "fixed-m", "--config", str(cfg_path), "--out-dir", str(tmp_path)
        )
        assert res.returncode == 0, res.stderr
        assert (tmp_path / "smoke.csv").exists()
        assert (tmp_path / "smoke.svg").exists()
        rows = emit.parse_csv(str(tmp_path / "smoke.csv"))
        assert len(rows) == 4

    def test_seed_offset_changes_rows(self, tmp_path):
        cfg_path = tmp_path / "smoke.cfg"
        cfg_path.write_text(SMOKE_CONFIG)
        self._run("fixed-m", "--config", str(cfg_path), "--out-dir", str(tmp_path / "a"))
        self._run(
            "fixed-m",
            "--config",
            str(cfg_path),
            "--out-dir",
            str(tmp_path / "b"),
            "--seed-offset",
            "100",
        )
        rows_a = emit.parse_csv(str(tmp_path / "a" / "smoke.csv"))
        rows_b = emit.parse_csv(str(tmp_path / "b" / "smoke.csv"))
        assert {r.seed for r in rows_b} == {100, 101}
        assert rows_a != rows_b

    def test_config_of_wrong_kind_exit_2(self, tmp_path):
        cfg_path = tmp_path / "smoke.cfg"
        cfg_path.write_text(SMOKE_CONFIG)
        res = self._run("m-sweep", "--config", str(cfg_path))
        assert res.returncode == 2
