"""Command-line interface.

Subcommands::

    optimize     --config FILE --out DIR [--deterministic] [--no-figures]
    check-kernel --config FILE
    spectrum     --pulse FILE --out FILE
    propagate    --config FILE --pulse FILE --out DIR [--no-figures]

Exit codes: 0 success (optimize: stop_error reached; check-kernel: kernel
is PSD), 2 completed-but-negative (optimize: hit max_iterations;
check-kernel: kernel not PSD), 1 errors of any kind.

Optimize and propagate runs write CSV data files plus, unless
``--no-figures`` is given, PNG figures rendered from the same arrays.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import plots
from .constraints import PSDReport, check_psd, field_spectrum
from .dynamics import TimeGrid, populations, propagate
from .errors import SpectralKrotovError
from .io import (
    read_pulse,
    write_convergence,
    write_populations,
    write_pulse,
    write_spectrum,
    write_summary,
)
from .krotov import ControlField, optimize
from .scenario import ScenarioConfig, build_guess, parse_config

__all__ = [
    "parse_config",
    "build_guess",
    "run_optimize",
    "run_check_kernel",
    "run_spectrum",
    "run_propagate",
    "main",
]


def run_optimize(
    config: ScenarioConfig,
    out_dir: str | Path,
    *,
    deterministic: bool = False,
    figures: bool = True,
) -> int:
    """Optimize the configured scenario and write its report files.

    Returns 0 when stop_error was reached, 2 when the iteration budget ran
    out first.  In deterministic mode the summary omits wall time so that
    repeated runs produce identical files throughout.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    guess = build_guess(config)
    started = time.perf_counter()
    record = optimize(config.system, guess, config.target_spec(), config.optimization())
    wall = time.perf_counter() - started

    field = record.final_field
    traj = record.final_trajectory
    times = config.grid.times
    write_pulse(out / "pulse.csv", times, field.eps)
    spectrum = field_spectrum(field.eps, config.grid)
    write_spectrum(out / "spectrum.csv", spectrum.frequencies, spectrum.amplitudes)
    pops = populations(traj)
    write_populations(out / "populations.csv", times, pops, config.labels)
    write_convergence(out / "convergence.csv", record.entries)

    summary = {
        "transfer": f"{config.initial_label} -> {config.target_label}",
        "iterations": record.iterations,
        "converged": record.converged,
        "final_error": "%.17g" % record.final_error,
        "final_J": "%.17g" % record.entries[-1].j_total,
        "monotonicity_violations": record.monotonicity_violations,
        "refinement_passes": record.total_refinement_passes,
    }
    if not deterministic:
        summary["wall_time_s"] = f"{wall:.3f}"
    write_summary(out / "summary.txt", summary)

    if figures:
        _render_run_figures(out, config, guess, field, traj, record, spectrum)
    return 0 if record.converged else 2


def _render_run_figures(out, config, guess, field, traj, record, spectrum):
    times = config.grid.times
    plots.render_pulse(out / "pulse.png", times, field.eps, guess=guess.eps)
    carrier = config.guess.carrier
    upper = 2.5 * carrier if carrier > 0 else None
    if config.kernel.components:
        widest = max(c.omega + 6 * c.sigma for c in config.kernel.components)
        upper = max(upper or 0.0, widest)
    window = (0.0, upper) if upper else None
    plots.render_spectrum(
        out / "spectrum.png",
        spectrum.frequencies,
        np.abs(spectrum.amplitudes) ** 2,
        kernel=config.kernel,
        carrier=carrier,
        omega_window=window,
    )
    plots.render_populations(out / "populations.png", times, populations(traj), config.labels)
    plots.render_convergence(out / "convergence.png", record.entries)


def run_check_kernel(config: ScenarioConfig) -> PSDReport:
    """Print the kernel's PSD analysis and return the report."""
    kernel = config.kernel
    report = check_psd(kernel)
    if not kernel.components:
        print(f"kernel has no components; Kbar(omega) = lambda_a = {kernel.lambda_a:g}")
    print(f"Kbar minimum: {report.min_value:.6e} at omega = {report.argmin:.6g}")
    for k, c in enumerate(kernel.components):
        margin = 2.0 * kernel.lambda_a - c.lambda_b
        role = "filter" if c.lambda_b < 0 else "pass"
        print(
            f"component {k}: {role} omega={c.omega:g} sigma={c.sigma:g} "
            f"lambda_b={c.lambda_b:g}  margin 2*lambda_a - lambda_b = {margin:g}"
        )
    verdict = "positive semi-definite" if report.is_psd else "NOT positive semi-definite"
    print(f"verdict: {verdict}")
    return report


def run_spectrum(pulse_file: str | Path, out_file: str | Path) -> int:
    """Compute and write the spectrum of a stored pulse."""
    t, eps = read_pulse(pulse_file)
    grid = TimeGrid(duration=float(t[-1] - t[0]), n_t=t.shape[0])
    spectrum = field_spectrum(eps, grid)
    amps = spectrum.amplitudes
    if t[0] != 0.0:
        # the DFT assumes samples starting at t = 0; restore the offset phase
        amps = amps * np.exp(-1j * spectrum.frequencies * t[0])
    write_spectrum(out_file, spectrum.frequencies, amps)
    return 0


def run_propagate(
    config: ScenarioConfig,
    pulse_file: str | Path,
    out_dir: str | Path,
    *,
    figures: bool = True,
) -> int:
    """Propagate the configured initial state under a stored pulse."""
    t, eps = read_pulse(pulse_file)
    grid = TimeGrid(duration=float(t[-1] - t[0]), n_t=t.shape[0])
    field = ControlField(grid=grid, eps=eps)
    target = config.target_spec()
    traj = propagate(config.system, field, target.initial, "forward")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pops = populations(traj)
    write_populations(out / "populations.csv", t, pops, config.labels)
    overlap = np.abs(np.vdot(target.target, traj.final)) ** 2
    write_summary(
        out / "summary.txt",
        {
            "transfer": f"{config.initial_label} -> {config.target_label}",
            "final_target_population": "%.17g" % overlap,
        },
    )
    if figures:
        plots.render_populations(out / "populations.png", t, pops, config.labels)
    return 0


def _cmd_optimize(args) -> int:
    config = parse_config(args.config)
    deterministic = args.deterministic or config.run.deterministic
    return run_optimize(
        config, args.out, deterministic=deterministic, figures=not args.no_figures
    )


def _cmd_check_kernel(args) -> int:
    config = parse_config(args.config, require_psd=False)
    report = run_check_kernel(config)
    return 0 if report.is_psd else 2


def _cmd_spectrum(args) -> int:
    return run_spectrum(args.pulse, args.out)


def _cmd_propagate(args) -> int:
    config = parse_config(args.config, require_psd=False)
    return run_propagate(config, args.pulse, args.out, figures=not args.no_figures)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-krotov",
        description="Spectrally constrained Krotov pulse optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run an optimization scenario")
    p_opt.add_argument("--config", required=True, help="scenario YAML file")
    p_opt.add_argument("--out", required=True, help="output directory")
    p_opt.add_argument(
        "--deterministic",
        action="store_true",
        help="omit timing from outputs so identical runs write identical files",
    )
    p_opt.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_opt.set_defaults(func=_cmd_optimize)

    p_chk = sub.add_parser("check-kernel", help="analyse the constraint kernel")
    p_chk.add_argument("--config", required=True, help="scenario YAML file")
    p_chk.set_defaults(func=_cmd_check_kernel)

    p_spec = sub.add_parser("spectrum", help="compute the spectrum of a pulse file")
    p_spec.add_argument("--pulse", required=True, help="pulse.csv input")
    p_spec.add_argument("--out", required=True, help="spectrum.csv output")
    p_spec.set_defaults(func=_cmd_spectrum)

    p_prop = sub.add_parser("propagate", help="propagate a stored pulse")
    p_prop.add_argument("--config", required=True, help="scenario YAML file")
    p_prop.add_argument("--pulse", required=True, help="pulse.csv input")
    p_prop.add_argument("--out", required=True, help="output directory")
    p_prop.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_prop.set_defaults(func=_cmd_propagate)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpectralKrotovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
