"""Experiment pipeline: config handling, fits, determinism, cache, CLI."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from convexortho import cli
from convexortho.experiments import (
    ExperimentConfig,
    ExperimentFailure,
    InsufficientData,
    fit_constants,
    parse_domain,
    run,
)
from convexortho.geometry import regular_polygon
from convexortho.orthopoly import Weight

GOLDEN = Path(__file__).parent / "golden"


def read_csv(path):
    lines = Path(path).read_text().strip().split("\n")
    cols = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return {c: np.array([float(r[i]) for r in rows]) for i, c in enumerate(cols)}


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(kind="nope", domain="disk")
        with pytest.raises(ValueError):
            ExperimentConfig(kind="orthopoly", domain="heptagon-ish")
        with pytest.raises(ValueError):
            ExperimentConfig(kind="orthopoly", domain="disk", n_min=5, n_max=3)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="orthopoly", domain="disk", n_max=99)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="sharpness", domain="disk", deltas=(0.5, 1.7))
        with pytest.raises(ValueError):
            ExperimentConfig(kind="orthopoly", domain="disk", jobs=0)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="orthopoly", domain="disk", grid_base=10)

    def test_round_trip(self):
        cfg = ExperimentConfig(
            kind="discrepancy-sweep",
            domain="ngon:5",
            weight=Weight("dist-power", m=1.0, c=2.0),
            n_min=3,
            n_max=12,
            deltas=[0.1, 0.4],
        )
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg
        assert isinstance(again.deltas, tuple)

    def test_hash_ignores_transient_fields(self):
        base = ExperimentConfig(kind="orthopoly", domain="disk")
        moved = ExperimentConfig(
            kind="orthopoly", domain="disk", out_dir="elsewhere", cache=False, jobs=4
        )
        assert base.config_hash() == moved.config_hash()
        other = ExperimentConfig(kind="orthopoly", domain="square")
        assert base.config_hash() != other.config_hash()
        deeper = ExperimentConfig(kind="orthopoly", domain="disk", n_max=21)
        assert base.config_hash() != deeper.config_hash()

    def test_parse_domain(self):
        assert parse_domain("disk").radius == 1.0
        assert parse_domain("disk:2.5").radius == 2.5
        assert parse_domain("square").vertices[0] == 1 + 1j
        pent = parse_domain("pentagon")
        assert np.allclose(pent.vertices, regular_polygon(5).vertices)
        assert np.allclose(parse_domain("ngon:5").vertices, pent.vertices)
        ell = parse_domain("ellipse:3:1.5")
        assert ell.a == 3.0 and ell.b == 1.5
        with pytest.raises(ValueError):
            parse_domain("blob")


class TestFitConstants:
    def test_planted_rate_recovered(self):
        records = [
            {"n": n, "D_n": 0.7 * math.sqrt(math.log(n) / n)} for n in range(2, 41)
        ]
        out = fit_constants(records)
        assert abs(out["c_lognn"] - 0.7) < 1e-10
        assert out["resid_lognn"] < 1e-12

    def test_planted_norm_growth(self):
        records = [{"n": n, "norm_qn": 2.5 * n**0.9} for n in range(1, 30)]
        out = fit_constants(records)
        assert abs(out["c2_norm_exponent"] - 0.9) < 1e-10
        assert abs(out["c1_norm_prefactor"] - 2.5) < 1e-9
        assert out["resid_norm_fit"] < 1e-12

    def test_lead_product_floor(self):
        records = [{"n": n, "lead_product": 3.0 / n**2} for n in range(1, 12)]
        out = fit_constants(records)
        assert abs(out["c3_min_n2_lead"] - 3.0) < 1e-12

    def test_sqrt_eps_max_ratio(self):
        records = [
            {"n": n, "D_n": 0.5 * math.sqrt(0.01), "eps_n": 0.01}
            for n in range(1, 12)
        ]
        out = fit_constants(records)
        assert abs(out["C_sqrt_eps_max"] - 0.5) < 1e-12
        assert abs(out["c_sqrt_eps"] - 0.5) < 1e-12

    def test_insufficient_data(self):
        records = [{"n": n, "D_n": 0.1} for n in range(2, 9)]
        with pytest.raises(InsufficientData):
            fit_constants(records)


class TestPipeline:
    def test_disk_sweep_closed_forms(self, tmp_path):
        cfg = ExperimentConfig(
            kind="discrepancy-sweep",
            domain="disk",
            n_min=1,
            n_max=10,
            out_dir=str(tmp_path),
        )
        rep = run(cfg)
        assert Path(rep.csv_path).exists() and Path(rep.json_path).exists()
        table = read_csv(rep.csv_path)
        n = table["n"]
        assert np.max(np.abs(table["lambda_n"] - np.sqrt((n + 1) / math.pi))) < 1e-9
        assert np.max(table["D_n"]) < 1e-10
        assert np.max(table["eps_n"]) < 1e-10
        assert np.array_equal(table["zeros_interior"], n)
        assert np.all(table["zeros_exterior"] == 0)

    def test_golden_disk_orthopoly(self, tmp_path):
        cfg = ExperimentConfig(
            kind="orthopoly", domain="disk", n_min=1, n_max=20, out_dir=str(tmp_path)
        )
        rep = run(cfg)
        fresh = read_csv(rep.csv_path)
        golden = read_csv(GOLDEN / "orthopoly-disk.csv")
        for col in ("n", "lambda_n", "norm_qn", "lead_product"):
            assert np.max(np.abs(fresh[col] - golden[col])) < 1e-9

    def test_rerun_bit_identical(self, tmp_path):
        kw = dict(kind="discrepancy-sweep", domain="disk", n_min=1, n_max=8)
        a = run(ExperimentConfig(out_dir=str(tmp_path / "a"), cache=False, **kw))
        b = run(ExperimentConfig(out_dir=str(tmp_path / "b"), cache=False, **kw))
        c = run(
            ExperimentConfig(out_dir=str(tmp_path / "c"), cache=False, jobs=3, **kw)
        )
        blob = Path(a.csv_path).read_bytes()
        assert Path(b.csv_path).read_bytes() == blob
        assert Path(c.csv_path).read_bytes() == blob

    def test_cache_round_trip(self, tmp_path):
        kw = dict(
            kind="orthopoly",
            domain="square",
            n_min=1,
            n_max=10,
            out_dir=str(tmp_path),
        )
        cold = run(ExperimentConfig(**kw))
        cache_files = list((tmp_path / "cache").glob("*.json"))
        assert cache_files
        warm = run(ExperimentConfig(**kw))
        assert Path(cold.csv_path).read_bytes() == Path(warm.csv_path).read_bytes()

    def test_sharpness_records(self, tmp_path):
        cfg = ExperimentConfig(
            kind="sharpness", domain="disk", deltas=(0.1, 0.5), out_dir=str(tmp_path)
        )
        rep = run(cfg)
        assert [r["delta"] for r in rep.records] == [0.1, 0.5]
        for r in rep.records:
            d = r["delta"]
            assert abs(r["capacity"] - (1 + d**2 / (4 * (1 + d)))) < 1e-12
            assert r["ratio"] >= 2 / (3 * math.pi)
        header = Path(rep.csv_path).read_text().split("\n")[0]
        assert header == "delta,capacity,interval_mass,D,eps,ratio"

    def test_faber_suite_disk(self, tmp_path):
        cfg = ExperimentConfig(
            kind="faber-suite", domain="disk", n_min=1, n_max=10, out_dir=str(tmp_path)
        )
        rep = run(cfg)
        for r in rep.records:
            assert abs(r["faber_norm"] - 1.0) < 1e-9
            assert abs(r["deriv_norm"] - (r["n"] + 1)) < 1e-8
            assert abs(r["lead_times_capn"] - 1.0) < 1e-12

    def test_chebyshev_suite_disk(self, tmp_path):
        cfg = ExperimentConfig(
            kind="chebyshev-suite",
            domain="disk",
            n_min=1,
            n_max=5,
            out_dir=str(tmp_path),
        )
        rep = run(cfg)
        for r in rep.records:
            assert r["converged"] == 1
            assert abs(r["cheb_norm"] - 1.0) < 1e-9

    def test_stage_failure_named(self, tmp_path):
        cfg = ExperimentConfig(
            kind="discrepancy-sweep",
            domain="disk",
            weight=Weight("dist-power", m=0.5, c=1.0),
            n_max=10,
            out_dir=str(tmp_path),
        )
        with pytest.raises(ExperimentFailure) as info:
            run(cfg)
        assert info.value.stage == "orthopoly"

    def test_fit_skip_note_when_few_points(self, tmp_path):
        cfg = ExperimentConfig(
            kind="orthopoly", domain="disk", n_min=1, n_max=5, out_dir=str(tmp_path)
        )
        rep = run(cfg)
        assert "skipped" in rep.constants["fit"]


class TestCLI:
    def test_validate_ok(self, capsys, tmp_path):
        code = cli.main(["validate", "--domain", "disk", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "hash:" in out and '"domain": "disk"' in out

    def test_validate_bad_domain(self, capsys):
        assert cli.main(["validate", "--domain", "blob"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_map_disk(self, capsys, tmp_path):
        code = cli.main(["map", "--domain", "disk", "--out", str(tmp_path)])
        assert code == 0
        assert "capacity: 1.0" in capsys.readouterr().out

    def test_sharpness_run(self, capsys, tmp_path):
        code = cli.main(["sharpness", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "sharpness-square.csv").exists()

    def test_config_file_and_overrides(self, capsys, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps({"kind": "orthopoly", "domain": "disk", "n_max": 12})
        )
        code = cli.main(
            [
                "orthopoly",
                "--config",
                str(cfg_path),
                "--out",
                str(tmp_path),
                "--n-max",
                "6",
                "--no-cache",
            ]
        )
        assert code == 0
        table = read_csv(tmp_path / "orthopoly-disk.csv")
        assert table["n"].max() == 6

    def test_zeros_summary(self, capsys, tmp_path):
        code = cli.main(
            ["zeros", "--domain", "disk", "--n-max", "4", "--out", str(tmp_path)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "interior=  4" in out

    def test_fit_subcommand(self, capsys, tmp_path):
        cfg = ExperimentConfig(
            kind="orthopoly", domain="disk", n_min=1, n_max=10, out_dir=str(tmp_path)
        )
        rep = run(cfg)
        assert cli.main(["fit", rep.json_path]) == 0
        assert "c2_norm_exponent" in capsys.readouterr().out
        short = tmp_path / "short.json"
        short.write_text(json.dumps({"records": [{"n": 1, "D_n": 0.1}]}))
        assert cli.main(["fit", str(short)]) == 3
        assert cli.main(["fit", str(tmp_path / "missing.json")]) == 2

    def test_numerical_failure_exit_code(self, capsys, tmp_path):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "kind": "discrepancy-sweep",
                    "domain": "disk",
                    "weight": {"kind": "dist-power", "m": 0.5, "c": 1.0},
                    "n_max": 10,
                }
            )
        )
        code = cli.main(
            ["sweep", "--config", str(cfg_path), "--out", str(tmp_path)]
        )
        assert code == 3
        assert "stage 'orthopoly' failed" in capsys.readouterr().err
