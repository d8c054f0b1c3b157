"""Command-line front end: sweeps and figure presets written as CSV.

Every command builds its output in memory as {filename: text}. Without
``--check`` the files are written to ``--out``; with it they are compared
numerically against what is already there and differences are reported.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import oracle as orc
from .params import (NOMINAL_DEFAULTS, STRONG_COUPLING, TWO_PI, ParamError, SystemParams,
                     build_params, parse_config)
from .peakfit import FitError, fit_lorentzian, fit_temperatures, synth_spectrum
from .response import effective_dynamics, omega_eff_shift
from .slab import OpticsError, cavity_mode, find_node
from .spectra import SpectrumError, default_grid, detect, s_q
from .steady import SteadyStateError, prepare, solve_at, solve_steady
from .thermometry import ThermometryError, analytic_report

COMMANDS = ("steady", "mode-sweep", "sweep-detuning", "sweep-position", "spectrum",
            "thermometry", "fit", "oracle", "figures")

MODULE_ERRORS = (OpticsError, SteadyStateError, SpectrumError, ThermometryError, FitError,
                 orc.OracleError, ZeroDivisionError, np.linalg.LinAlgError)

# detunings of the spectrum family, Hz
FIG2_DETUNINGS_HZ = (30e3, 60e3, 180e3, 280e3, 320e3, 340e3, 355e3, 380e3, 410e3, 600e3)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    params_file: Path | None = None
    output_dir: Path = Path(".")
    overrides: dict = field(default_factory=dict)
    seed: int = 0
    grid: tuple[float, float, int] | None = None
    check: bool = False
    workers: int = 1
    window_hz: tuple[float, float] | None = None
    snapshots: int = 200
    input: Path | None = None
    trajectories: int = 20
    segments: int = 100
    laser_offset_hz: float | None = None

    def params(self) -> SystemParams:
        raw = dict(NOMINAL_DEFAULTS)
        if self.params_file is not None:
            try:
                raw.update(parse_config(Path(self.params_file).read_text()))
            except OSError as exc:
                raise ConfigError(f"cannot read params file: {exc}") from exc
        raw.update(self.overrides)
        return build_params(raw)


# ---------------------------------------------------------------------------
# CSV helpers

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ConfigError("empty CSV")
    return rows[0], rows[1:]


def _cells_match(a: str, b: str, rtol: float) -> bool:
    if a == b:
        return True
    try:
        x, y = float(a), float(b)
    except ValueError:
        return False
    if math.isnan(x) and math.isnan(y):
        return True
    return math.isclose(x, y, rel_tol=rtol, abs_tol=0.0)


def diff_csv(new: str, old: str, rtol: float = 1e-9) -> list[str]:
    """Human-readable differences between two CSV texts (empty if equivalent)."""
    hn, rn = read_csv(new)
    ho, ro = read_csv(old)
    if hn != ho:
        return [f"header differs: {ho} -> {hn}"]
    if len(rn) != len(ro):
        return [f"row count differs: {len(ro)} -> {len(rn)}"]
    out = []
    for i, (a, b) in enumerate(zip(rn, ro)):
        for name, x, y in zip(hn, a, b):
            if not _cells_match(x, y, rtol):
                out.append(f"row {i + 1} {name}: {y} -> {x}")
    return out


def _map(fn, items, workers: int):
    """Ordered map, optionally over a process pool."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(len(items) // (4 * workers), 1)))


def _grid(cfg: RunConfig, default: tuple[float, float, int]) -> np.ndarray:
    lo, hi, n = cfg.grid if cfg.grid is not None else default
    return np.linspace(lo, hi, int(n))


# ---------------------------------------------------------------------------
# commands

STEADY_HEADER = ["branch_id", "q_s", "alpha_s_sq", "delta_rad_s", "kappa_T", "g", "g_probe",
                 "h", "gamma_abs", "stable"]


def cmd_steady(cfg: RunConfig) -> dict[str, str]:
    params, optics = prepare(cfg.params())
    if cfg.laser_offset_hz is not None:
        pts = solve_steady(params, optics, laser_offset=TWO_PI * cfg.laser_offset_hz)
    else:
        pts = solve_steady(params, optics)
    rows = [[i, p.q_s, p.alpha_s ** 2, p.delta, p.kappa_T, p.g, p.g_probe, p.h, p.gamma_abs,
             p.stable] for i, p in enumerate(pts)]
    return {"steady.csv": to_csv(STEADY_HEADER, rows)}


MODE_HEADER = ["z0_m", "omega_shift_rad_s", "d_omega_dz", "d2_omega_dz2", "kappa1_rad_s"]


def _mode_point(z, params):
    r = cavity_mode(params.cavity, params.membrane, params.drive.wavelength, float(z))
    return [z, r.shift, r.d_omega_dz, r.d2_omega_dz2, r.kappa1]


def cmd_mode_sweep(cfg: RunConfig) -> dict[str, str]:
    params = cfg.params()
    lam = params.drive.wavelength
    z = _grid(cfg, (0.0, lam / 2.0, 101))
    rows = _map(partial(_mode_point, params=params), z, cfg.workers)
    return {"mode_sweep.csv": to_csv(MODE_HEADER, rows)}


DETUNING_HEADER = ["delta_over_omega_m", "gamma_eff_over_gamma_m", "omega_eff_minus_omega_m_hz"]


def detuning_rows(params: SystemParams, ratios) -> list[list[float]]:
    """Damping and frequency shift at fixed power, dispersion fixed at the reference point."""
    params, optics = prepare(params)
    mech = params.mech
    rows = []
    for x in ratios:
        op = solve_at(params, optics, x * mech.omega_m)
        r = effective_dynamics(mech.omega_m, op, mech).scalar()
        rows.append([x, r.gamma_eff / mech.gamma_m, omega_eff_shift(op, mech) / TWO_PI])
    return rows


def cmd_sweep_detuning(cfg: RunConfig) -> dict[str, str]:
    ratios = _grid(cfg, (0.08, 1.7, 200))
    return {"sweep_detuning.csv": to_csv(DETUNING_HEADER, detuning_rows(cfg.params(), ratios))}


POSITION_HEADER = ["node_offset_m", "z0_m", "omega_eff_minus_omega_m_hz", "h_rad_s",
                   "d2_omega_dz2"]


def _position_point(offset, params, node):
    p = params.with_(optics_mode="slab", node_offset_m=float(offset))
    p, optics = prepare(p)
    op = solve_at(p, optics, 0.0)
    return [offset, node + offset, omega_eff_shift(op, p.mech) / TWO_PI, op.h,
            optics.a2 / optics.lq ** 2]


def position_rows(params: SystemParams, offsets, workers: int = 1):
    node = find_node(params.cavity, params.membrane, params.drive.wavelength)
    return _map(partial(_position_point, params=params, node=node), offsets, workers)


def cmd_sweep_position(cfg: RunConfig) -> dict[str, str]:
    params = cfg.params()
    offsets = _grid(cfg, (0.0, params.drive.wavelength / 4.0, 101))
    return {"sweep_position.csv": to_csv(POSITION_HEADER, position_rows(params, offsets,
                                                                        cfg.workers))}


SPECTRUM_HEADER = ["freq_hz", "s_x_det_m2_per_hz", "s_x_det_one_sided_m2_per_hz", "s_q",
                   "s_th_part", "s_rp_part", "s_abs_part", "floor"]


def spectrum_rows(params: SystemParams, freq_hz=None, delta: float | None = None):
    """Detected spectrum rows; parts are |chi|^2 times each force term (q units)."""
    params, optics = prepare(params)
    op = solve_at(params, optics, delta)
    mech = params.mech
    w = default_grid(op, mech) if freq_hz is None else TWO_PI * np.asarray(freq_hz, dtype=float)
    tr = detect(s_q(w, op, mech, params.bath), op, params)
    c = tr.components
    rows = []
    for i in range(len(w)):
        rows.append([w[i] / TWO_PI, tr.s_x_det[i], 2.0 * tr.s_x_det[i], tr.s_q[i],
                     tr.chi2[i] * c["thermal"][i], tr.chi2[i] * c["radiation_pressure"][i],
                     tr.chi2[i] * c["absorption"][i], tr.floor[i]])
    return rows


def cmd_spectrum(cfg: RunConfig) -> dict[str, str]:
    freq = _grid(cfg, (0, 0, 0)) if cfg.grid is not None else None
    return {"spectrum.csv": to_csv(SPECTRUM_HEADER, spectrum_rows(cfg.params(), freq))}


THERMO_HEADER = ["delta_over_omega_m", "t_area_K", "t_gamma_K", "t_peak_K", "n_eff"]


def _thermo_point(x, params, optics):
    op = solve_at(params, optics, x * params.mech.omega_m)
    r = analytic_report(op, params.mech, params.bath)
    return [x, r.t_area, r.t_gamma, r.t_peak, r.n_eff]


def thermometry_rows(params: SystemParams, ratios, workers: int = 1):
    params, optics = prepare(params)
    return _map(partial(_thermo_point, params=params, optics=optics), ratios, workers)


def cmd_thermometry(cfg: RunConfig) -> dict[str, str]:
    ratios = _grid(cfg, (0.08, 1.7, 50))
    return {"thermometry.csv": to_csv(THERMO_HEADER, thermometry_rows(cfg.params(), ratios,
                                                                      cfg.workers))}


FIT_HEADER = ["center_hz", "fwhm_hz", "height_m2_per_hz", "area_m2", "floor_m2_per_hz",
              "sigma_center_hz", "sigma_fwhm_hz", "sigma_height_m2_per_hz", "sigma_area_m2",
              "sigma_floor_m2_per_hz", "residual_rms", "chi2_dof", "t_area_K", "t_gamma_K",
              "t_peak_K", "sigma_t_area_K", "sigma_t_gamma_K", "sigma_t_peak_K", "snapshots",
              "seed"]


def cmd_fit(cfg: RunConfig) -> dict[str, str]:
    if cfg.input is None:
        raise ConfigError("fit needs --input pointing to a spectrum CSV")
    try:
        header, rows = read_csv(Path(cfg.input).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read input: {exc}") from exc
    try:
        fi, si = header.index("freq_hz"), header.index("s_x_det_m2_per_hz")
    except ValueError:
        raise ConfigError("input CSV needs freq_hz and s_x_det_m2_per_hz columns") from None
    f = np.array([float(r[fi]) for r in rows])
    s = np.array([float(r[si]) for r in rows])
    w = TWO_PI * f
    m = cfg.snapshots if cfg.snapshots > 0 else None
    if m:
        s = synth_spectrum(w, s, m, cfg.seed).values
    window = None if cfg.window_hz is None else (TWO_PI * cfg.window_hz[0],
                                                 TWO_PI * cfg.window_hz[1])
    fit = fit_lorentzian(w, s, snapshots=m, window=window)
    params = cfg.params()
    temps = fit_temperatures(fit, params.mech, params.bath, params.mech.x_zpf)
    # spectra are densities per unit w/2pi; the fit works in w
    row = [fit.center / TWO_PI, fit.fwhm / TWO_PI, fit.height, fit.area / TWO_PI, fit.floor,
           fit.sigma("center") / TWO_PI, fit.sigma("fwhm") / TWO_PI, fit.sigma("height"),
           fit.sigma("area") / TWO_PI, fit.sigma("floor"), fit.residual_rms, fit.chi2_dof,
           temps.t_area, temps.t_gamma, temps.t_peak, temps.sigma_area, temps.sigma_gamma,
           temps.sigma_peak, cfg.snapshots, cfg.seed]
    return {"fit.csv": to_csv(FIT_HEADER, [row])}


def cmd_oracle(cfg: RunConfig) -> dict[str, str]:
    params, optics = prepare(cfg.params())
    op = solve_at(params, optics)
    mech = params.mech
    r = effective_dynamics(mech.omega_m, op, mech).scalar()
    dt = orc.bandpass_dt(r.omega_eff, 40.0 * r.gamma_eff)
    fs = 1.0 / dt
    nper = 1 << int(math.ceil(math.log2(fs / (r.gamma_eff / 20.0 / TWO_PI) / TWO_PI)))
    duration = cfg.segments * nper * dt
    n = params.n_thermal
    est = orc.oracle_psd(op, mech, n, cfg.trajectories, duration, dt, nper, seed=cfg.seed,
                         center=r.omega_eff)
    w = est.omega_grid
    fs_rad = TWO_PI * fs

    def analytic(x):
        return s_q(x, op, mech, params.bath, flat_thermal=True).s_q

    ref = orc.aliased_reference(w, analytic, fs_rad)
    raw = [[w[i] / TWO_PI, est.s_q[i]] for i in range(len(w))]
    cmp_rows = [[w[i] / TWO_PI, ref[i], est.s_q[i], est.s_q[i] / ref[i],
                 int(abs(w[i] - r.omega_eff) <= 5 * r.gamma_eff)] for i in range(len(w))]
    return {"oracle_psd.csv": to_csv(["freq_hz", "s_q_oracle"], raw),
            "oracle_compare.csv": to_csv(["freq_hz", "s_q_analytic", "s_q_oracle",
                                          "ratio", "in_window"], cmp_rows)}


def figure_tables(base: SystemParams, workers: int = 1) -> dict[str, str]:
    """The five figure tables: spectra, damping, shift, shift vs position, temperatures."""
    strong = base.with_(**STRONG_COUPLING)
    out = {}
    freq = np.linspace(330e3, 380e3, 1001)
    rows = []
    for d in FIG2_DETUNINGS_HZ:
        for r in spectrum_rows(base, freq, delta=TWO_PI * d):
            rows.append([d] + r)
    out["fig2.csv"] = to_csv(["delta_hz"] + SPECTRUM_HEADER, rows)
    sweep = detuning_rows(base, np.linspace(0.08, 1.7, 200))
    out["fig3.csv"] = to_csv(DETUNING_HEADER[:2], [r[:2] for r in sweep])
    out["fig4.csv"] = to_csv([DETUNING_HEADER[0], DETUNING_HEADER[2]], [[r[0], r[2]] for r in sweep])
    low = base.with_(power_w=76e-6)
    out["fig5.csv"] = to_csv(POSITION_HEADER, position_rows(
        low, np.linspace(0.0, base.drive.wavelength / 4.0, 101), workers))
    rows = []
    for label, p in (("small", base), ("strong", strong)):
        for r in thermometry_rows(p, np.linspace(0.08, 1.7, 50), workers):
            rows.append([label] + r)
    out["fig6.csv"] = to_csv(["coupling"] + THERMO_HEADER, rows)
    return out


def cmd_figures(cfg: RunConfig) -> dict[str, str]:
    return figure_tables(cfg.params(), cfg.workers)


HANDLERS = {
    "steady": cmd_steady, "mode-sweep": cmd_mode_sweep, "sweep-detuning": cmd_sweep_detuning,
    "sweep-position": cmd_sweep_position, "spectrum": cmd_spectrum,
    "thermometry": cmd_thermometry, "fit": cmd_fit, "oracle": cmd_oracle,
    "figures": cmd_figures,
}


# ---------------------------------------------------------------------------
# argument handling

def _parse_grid(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--grid expects start:stop:count, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"--grid expects numbers, got {text!r}") from None
    if n < 1:
        raise ConfigError("--grid count must be >= 1")
    return lo, hi, n


def _parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected lo:hi, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"expected numbers, got {text!r}") from None
    if not hi > lo:
        raise ConfigError("range must have hi > lo")
    return lo, hi


def _parse_overrides(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        # an empty value clears the key (e.g. to drop a coupling target)
        out[key.strip()] = value.strip() or None
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mimcool", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--params", type=Path, help="key = value parameter file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one parameter (repeatable); KEY= clears it")
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--grid", help="start:stop:count for the swept variable")
    ap.add_argument("--check", action="store_true",
                    help="re-derive and diff against the files already in --out")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--input", type=Path, help="spectrum CSV for fit")
    ap.add_argument("--window-hz", help="lo:hi fit window in Hz")
    ap.add_argument("--snapshots", type=int, default=200,
                    help="averaged periodograms for synthetic noise (0 fits the input as is)")
    ap.add_argument("--trajectories", type=int, default=20)
    ap.add_argument("--segments", type=int, default=100, help="Welch segments per trajectory")
    ap.add_argument("--laser-offset-hz", type=float,
                    help="steady: hold the laser fixed at this offset below the bare cavity line")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command, params_file=args.params, output_dir=args.out,
        overrides=_parse_overrides(args.set), seed=args.seed,
        grid=_parse_grid(args.grid) if args.grid else None, check=args.check,
        workers=max(args.workers, 1),
        window_hz=_parse_range(args.window_hz) if args.window_hz else None,
        snapshots=args.snapshots, input=args.input, trajectories=args.trajectories,
        segments=args.segments, laser_offset_hz=args.laser_offset_hz)


def run(cfg: RunConfig) -> int:
    files = HANDLERS[cfg.command](cfg)
    out = Path(cfg.output_dir)
    if cfg.check:
        bad = 0
        for name, text in files.items():
            path = out / name
            if not path.exists():
                print(f"{name}: missing", file=sys.stderr)
                bad += 1
                continue
            diffs = diff_csv(text, path.read_text())
            for d in diffs[:20]:
                print(f"{name}: {d}", file=sys.stderr)
            bad += bool(diffs)
            print(f"{name}: {'ok' if not diffs else f'{len(diffs)} differences'}")
        return 1 if bad else 0
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}") from exc
    for name in files:
        print(out / name)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except (ConfigError, ParamError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except MODULE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
