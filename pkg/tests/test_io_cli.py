"""HMF1 round-trips, config parsing, CLI subcommands and exit codes."""

import json
import struct

import numpy as np
import pytest

from torma import cli, hmf1
from torma import grid as gr
from torma import testfields as tf
from torma.config import load_config
from torma.errors import ValidationError


@pytest.fixture
def g2():
    return gr.TorusGrid.reduced(2, 16)


class TestHMF1:
    def test_scalar_roundtrip_bit_exact(self, g2, rng, tmp_path):
        f = tf.random_band_limited_real(g2, rng) + 1j * tf.random_band_limited_real(g2, rng)
        path = tmp_path / "f.hmf1"
        hmf1.write_field(path, g2, f)
        grid2, back = hmf1.read_field(path)
        assert grid2.sizes == g2.sizes
        assert back.tobytes() == f.astype(np.complex128).tobytes()

    def test_metric_roundtrip(self, g2, rng, tmp_path):
        m = tf.random_hermitian_metric(g2, rng)
        path = tmp_path / "m.hmf1"
        hmf1.write_field(path, g2, m)
        _, back = hmf1.read_field(path)
        assert np.array_equal(back, m)

    def test_header_bytes(self, g2, tmp_path):
        path = tmp_path / "z.hmf1"
        hmf1.write_field(path, g2, np.zeros(g2.sizes, dtype=complex))
        raw = path.read_bytes()
        magic, version, ncomp, reserved = struct.unpack_from("<4sIII", raw, 0)
        assert magic == b"HMF1" and version == 1 and ncomp == 1 and reserved == 0
        (n,) = struct.unpack_from("<I", raw, 16)
        assert n == 2
        sizes = struct.unpack_from("<4I", raw, 20)
        assert sizes == (16, 1, 16, 1)
        mask = struct.unpack_from("<4B", raw, 36)
        assert mask == (1, 0, 1, 0)
        assert len(raw) == 40 + 16 * 256

    def test_rejects_corruption(self, g2, tmp_path):
        path = tmp_path / "bad.hmf1"
        hmf1.write_field(path, g2, np.zeros(g2.sizes, dtype=complex))
        raw = bytearray(path.read_bytes())
        raw[0] = ord("X")
        path.write_bytes(bytes(raw))
        with pytest.raises(ValidationError):
            hmf1.read_field(path)
        # truncated payload
        hmf1.write_field(path, g2, np.zeros(g2.sizes, dtype=complex))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValidationError):
            hmf1.read_field(path)

    def test_rejects_bad_shape(self, g2):
        with pytest.raises(ValidationError):
            hmf1.write_field("/tmp/never.hmf1", g2, np.zeros((3, 3)))


class TestConfig:
    def test_minimal_flat_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[problem]\nn = 2\nsizes = 16,1,16,1\nvariant = psi\n", encoding="utf-8"
        )
        run = load_config(cfg)
        assert run.spec.grid.sizes == (16, 1, 16, 1)
        assert run.solver.newton_tol > 0

    def test_missing_field_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[problem]\nn = 2\nsizes = 16,1,16,1\nomega = nope.hmf1\n",
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="omega"):
            load_config(cfg)

    def test_bad_variant_message(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[problem]\nn = 2\nsizes = 16,1,16,1\nvariant = zeta\n",
                       encoding="utf-8")
        with pytest.raises(ValidationError, match="variant"):
            load_config(cfg)


class TestCli:
    def test_solve_flat_exit_zero(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[problem]\nn = 2\nsizes = 16,1,16,1\n\n"
            "[outputs]\nreport = report.json\nrecords = records.jsonl\nu = u.hmf1\n",
            encoding="utf-8",
        )
        code = cli.main(["solve", "--config", str(cfg)])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["converged"]
        assert abs(report["b"]) < 1e-10
        lines = (tmp_path / "records.jsonl").read_text().strip().splitlines()
        assert all("residual_sup" in json.loads(line) for line in lines)
        _, u = hmf1.read_field(tmp_path / "u.hmf1")
        assert np.max(np.abs(u)) < 1e-9

    def test_manufacture_then_solve_recovery(self, tmp_path, capsys):
        out = tmp_path / "prob"
        assert cli.main([
            "manufacture", "--n", "3", "--size", "16", "--active", "0,2",
            "--amplitude", "0.05", "--seed", "7", "--out", str(out),
        ]) == 0
        assert cli.main(["solve", "--config", str(out / "solve.cfg")]) == 0
        meta = json.loads((out / "meta.json").read_text())
        report = json.loads((out / "report.json").read_text())
        _, u = hmf1.read_field(out / "u.hmf1")
        _, u_star = hmf1.read_field(out / "u_star.hmf1")
        u_star_sup = u_star - np.max(u_star.real)
        rel = np.max(np.abs(u - u_star_sup)) / np.max(np.abs(u_star_sup))
        assert rel < 1e-6
        assert abs(report["b"] - meta["b_star"]) < 1e-8

    def test_validate_metric_flat(self, tmp_path, capsys):
        grid = gr.TorusGrid.reduced(3, 8)
        flat = np.broadcast_to(np.eye(3, dtype=complex), grid.sizes + (3, 3)).copy()
        path = tmp_path / "flat.hmf1"
        hmf1.write_field(path, grid, flat)
        assert cli.main(["validate-metric", "--field", str(path)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["defects"]["gauduchon_defect"] < 1e-12
        assert payload["torsion_sup"] < 1e-12

    def test_exit_2_on_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[problem]\nn = 2\nsizes = 7,1,16,1\n", encoding="utf-8")
        assert cli.main(["solve", "--config", str(cfg)]) == 2

    def test_exit_3_on_solver_failure(self, tmp_path, capsys):
        grid = gr.TorusGrid.reduced(2, 16)
        f_big = (60.0 * np.cos(2 * np.pi * grid.coordinate(0)).real).astype(complex)
        fpath = tmp_path / "F.hmf1"
        hmf1.write_field(fpath, grid, f_big)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "[problem]\nn = 2\nsizes = 16,1,16,1\nF = F.hmf1\n\n"
            "[solver]\nmax_newton = 4\nmin_t_step = 0.125\n",
            encoding="utf-8",
        )
        assert cli.main(["solve", "--config", str(cfg)]) == 3

    def test_determinism_bit_identical_reports(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            cli.main([
                "manufacture", "--n", "2", "--size", "16", "--active", "0,2",
                "--seed", "11", "--out", str(out),
            ])
            cli.main(["solve", "--config", str(out / "solve.cfg")])
            outs.append((
                (out / "report.json").read_bytes(),
                (out / "records.jsonl").read_bytes(),
                (out / "u.hmf1").read_bytes(),
            ))
        assert outs[0] == outs[1]

    def test_gauduchon_factor_command(self, tmp_path, capsys):
        grid = gr.TorusGrid.reduced(3, 16, active_coords=(0, 2))
        rng = np.random.default_rng(5)
        omega = tf.random_hermitian_metric(grid, rng, amplitude=0.15, max_mode=1)
        path = tmp_path / "omega.hmf1"
        hmf1.write_field(path, grid, omega)
        sig_path = tmp_path / "sigma.hmf1"
        assert cli.main([
            "gauduchon-factor", "--field", str(path), "--out", str(sig_path),
            "--tol", "1e-9",
        ]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["defect_after"] < 1e-7
        assert sig_path.exists()

    def test_ricci_command_trivial_and_obstructed(self, tmp_path, capsys):
        grid = gr.TorusGrid.reduced(3, 8)
        cfg = tmp_path / "run.cfg"
        cfg.write_text("[problem]\nn = 3\nsizes = 8,1,8,1,8,1\n", encoding="utf-8")
        psi = np.zeros(grid.sizes + (3, 3), dtype=complex)  # = Ric(flat)
        psi_path = tmp_path / "psi.hmf1"
        hmf1.write_field(psi_path, grid, psi)
        out_metric = tmp_path / "metric.hmf1"
        code = cli.main([
            "ricci", "--config", str(cfg), "--psi", str(psi_path),
            "--out-metric", str(out_metric),
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["ricci_defect"] < 1e-9
        _, metric = hmf1.read_field(out_metric)
        assert np.max(np.abs(metric - np.eye(3))) < 1e-9
        # a constant (1,1)-form with nonzero trace is cohomologically obstructed
        hmf1.write_field(psi_path, grid, psi + 0.05 * np.eye(3))
        assert cli.main(["ricci", "--config", str(cfg), "--psi", str(psi_path)]) == 2

    def test_diagnose_command(self, tmp_path, capsys):
        out = tmp_path / "prob"
        cli.main([
            "manufacture", "--n", "3", "--size", "16", "--active", "0,2",
            "--seed", "3", "--out", str(out),
        ])
        cli.main(["solve", "--config", str(out / "solve.cfg")])
        report = json.loads((out / "report.json").read_text())
        code = cli.main([
            "diagnose", "--config", str(out / "solve.cfg"),
            "--u", str(out / "u.hmf1"), "--b", str(report["b"]),
            "--out", str(out / "diag.json"), "--csv", str(out / "cherrier.csv"),
        ])
        assert code == 0
        diag = json.loads((out / "diag.json").read_text())
        assert diag["b_bound"]["satisfied"]
        assert (out / "cherrier.csv").read_text().startswith("p,")
