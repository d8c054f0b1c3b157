import csv

import numpy as np
import pytest

from mimcool.cli import (DETUNING_HEADER, MODE_HEADER, SPECTRUM_HEADER, STEADY_HEADER,
                         THERMO_HEADER, diff_csv, main, to_csv)


def read(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@pytest.fixture(scope="module")
def figures_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("figs")
    assert main(["figures", "--out", str(out)]) == 0
    return out


def test_figures_emits_five_tables(figures_dir):
    names = sorted(p.name for p in figures_dir.iterdir())
    assert names == ["fig2.csv", "fig3.csv", "fig4.csv", "fig5.csv", "fig6.csv"]
    h, rows = read(figures_dir / "fig2.csv")
    assert h == ["delta_hz"] + SPECTRUM_HEADER
    assert len({r[0] for r in rows}) == 10
    h, _ = read(figures_dir / "fig6.csv")
    assert h == ["coupling"] + THERMO_HEADER
    h, rows = read(figures_dir / "fig3.csv")
    gam = np.array([float(r[1]) for r in rows])
    x = np.array([float(r[0]) for r in rows])
    assert 0.9 < x[np.argmax(gam)] < 1.1


def test_figures_are_byte_identical_on_rerun(figures_dir, tmp_path):
    assert main(["figures", "--out", str(tmp_path)]) == 0
    for p in figures_dir.iterdir():
        assert (tmp_path / p.name).read_bytes() == p.read_bytes()


def test_check_mode_passes_and_detects_drift(figures_dir, tmp_path, capsys):
    assert main(["figures", "--out", str(figures_dir), "--check"]) == 0
    for p in figures_dir.iterdir():
        (tmp_path / p.name).write_bytes(p.read_bytes())
    text = (tmp_path / "fig3.csv").read_text().splitlines()
    cells = text[5].split(",")
    cells[1] = repr(float(cells[1]) * 1.01)
    text[5] = ",".join(cells)
    (tmp_path / "fig3.csv").write_text("\n".join(text) + "\n")
    capsys.readouterr()
    assert main(["figures", "--out", str(tmp_path), "--check"]) == 1
    assert "fig3.csv: 1 differences" in capsys.readouterr().out


def test_steady_csv(tmp_path):
    assert main(["steady", "--out", str(tmp_path)]) == 0
    h, rows = read(tmp_path / "steady.csv")
    assert h == STEADY_HEADER
    assert len(rows) == 1 and rows[0][-1] == "1"


def test_steady_reports_three_branches(tmp_path):
    args = ["steady", "--out", str(tmp_path), "--set", "g_target=", "--set", "h_target=",
            "--set", "d_omega_dz=-1e16", "--set", "power_w=0.02",
            "--laser-offset-hz", str(6 * 77e3)]
    assert main(args) == 0
    _, rows = read(tmp_path / "steady.csv")
    assert [r[-1] for r in rows] == ["1", "0", "1"]


def test_sweep_detuning_peaks_near_sideband(tmp_path):
    assert main(["sweep-detuning", "--out", str(tmp_path), "--grid", "0.08:1.7:200"]) == 0
    h, rows = read(tmp_path / "sweep_detuning.csv")
    assert h == DETUNING_HEADER
    data = np.array(rows, dtype=float)
    assert 0.95 <= data[np.argmax(data[:, 1]), 0] <= 1.10


def test_mode_sweep_and_params_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n_real = 2.2\n")
    assert main(["mode-sweep", "--params", str(cfg), "--out", str(tmp_path),
                 "--grid", "0:2.66e-7:3"]) == 0
    h, rows = read(tmp_path / "mode_sweep.csv")
    assert h == MODE_HEADER and len(rows) == 3


def test_workers_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["thermometry", "--out", str(a), "--grid", "0.5:1.5:6"]) == 0
    assert main(["thermometry", "--out", str(b), "--grid", "0.5:1.5:6", "--workers", "2"]) == 0
    assert (a / "thermometry.csv").read_bytes() == (b / "thermometry.csv").read_bytes()


def test_spectrum_then_fit(tmp_path):
    assert main(["spectrum", "--out", str(tmp_path), "--grid", "354000:359000:1001"]) == 0
    h, _ = read(tmp_path / "spectrum.csv")
    assert h == SPECTRUM_HEADER
    assert main(["fit", "--input", str(tmp_path / "spectrum.csv"), "--out", str(tmp_path),
                 "--seed", "3", "--snapshots", "200"]) == 0
    h, rows = read(tmp_path / "fit.csv")
    vals = dict(zip(h, rows[0]))
    assert float(vals["t_gamma_K"]) == pytest.approx(45.43, rel=0.05)
    assert vals["seed"] == "3"


def test_oracle_writes_raw_and_comparison(tmp_path):
    assert main(["oracle", "--out", str(tmp_path), "--trajectories", "2", "--segments", "20"]) == 0
    h, _ = read(tmp_path / "oracle_psd.csv")
    assert h == ["freq_hz", "s_q_oracle"]
    h, rows = read(tmp_path / "oracle_compare.csv")
    assert "ratio" in h
    data = np.array(rows, dtype=float)
    inside = data[data[:, 4] == 1]
    assert abs(np.mean(inside[:, 3]) - 1.0) < 0.1


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["steady", "--set", "bogus=1", "--out", str(tmp_path)]) == 2
    assert main(["steady", "--set", "novalue", "--out", str(tmp_path)]) == 2
    assert main(["sweep-detuning", "--grid", "1:2", "--out", str(tmp_path)]) == 2
    assert main(["steady", "--params", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 2
    assert main(["fit", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 2


def test_module_errors_exit_1(tmp_path, capsys):
    flat = tmp_path / "flat.csv"
    f = np.linspace(3.5e5, 3.6e5, 300)
    flat.write_text(to_csv(["freq_hz", "s_x_det_m2_per_hz"], [[x, 1e-30] for x in f]))
    assert main(["fit", "--input", str(flat), "--out", str(tmp_path)]) == 1
    assert "NoPeakFound" in capsys.readouterr().err


def test_diff_csv_tolerates_last_digit_noise():
    a = to_csv(["x"], [[1.0]])
    b = to_csv(["x"], [[1.0 + 1e-13]])
    assert diff_csv(a, b) == []
    assert diff_csv(a, to_csv(["x"], [[1.1]]))
    assert diff_csv(a, to_csv(["y"], [[1.0]]))
