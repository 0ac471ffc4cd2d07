"""Command-line front end: ``spade-sense {sweep,figure,montecarlo,errata}``.

Lengths are in units of the PSF width (omega = 1, kappa = 1, so ``n_s`` is the
``--ns-kappa`` value).  Exit codes: 0 success, 2 usage/parameter error,
3 numerical or domain failure.
"""
from __future__ import annotations

import argparse
import itertools
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import errata, sensitivity
from .detection import total_count
from .errors import ConvergenceError, DegenerateEstimatorError, DomainError, ParameterError
from .montecarlo import Sampler, run_trials, thread_count
from .optics import ModeBasis, OpticsParams
from .source import SourceParams

EXIT_USAGE = 2
EXIT_NUMERIC = 3

SWEEP_AXES = ("r", "theta", "g2", "ns_kappa", "d_over_2omega")
SWEEP_COLUMNS = SWEEP_AXES + ("R_rim", "R_tpd", "R_total", "N_D", "var_d_per_tau")
MC_SUMMARY_COLUMNS = SWEEP_AXES + (
    "tau", "trials", "seed", "sampler", "empirical_var", "predicted_var", "ratio", "bias", "bias_stderr", "var_stderr",
)

DEFAULTS = {
    "r": "0.5",
    "theta": "0",
    "g2": "1",
    "ns_kappa": "0.9",
    "d_over_2omega": "0.5",
    "modes": None,
    "tail_tol": "1e-13",
    "method": "closed",
    "tau": "10000",
    "trials": "2000",
    "seed": "42",
    "sampler": "gaussian",
}

UNIT_OPTICS = OpticsParams(kappa=1.0, omega=1.0)
_PI_TERM = re.compile(r"^([-+]?\d*\.?\d*(?:e[-+]?\d+)?)\*?pi(?:/(\d+(?:\.\d*)?))?$")


class UsageError(Exception):
    pass


class PointError(Exception):
    """Numerical failure at a named grid point."""


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    return f"{value:.12g}"


def parse_number(text: str) -> float:
    text = text.strip().lower()
    m = _PI_TERM.match(text)
    if m:
        coef = m.group(1)
        coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        div = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / div
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"not a number: {text!r}") from None


def parse_axis(name: str, text: str) -> list[float]:
    """Scalar, comma list, or inclusive ``start:stop:step`` range."""
    text = str(text).strip()
    if not text:
        raise UsageError(f"--{name.replace('_', '-')}: empty axis")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"--{name.replace('_', '-')}: expected start:stop:step, got {text!r}")
        start, stop, step = (parse_number(p) for p in parts)
        if not step > 0:
            raise UsageError(f"--{name.replace('_', '-')}: step must be positive")
        if stop < start:
            raise UsageError(f"--{name.replace('_', '-')}: stop {stop} is below start {start}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    values = [parse_number(p) for p in text.split(",") if p.strip()]
    if not values:
        raise UsageError(f"--{name.replace('_', '-')}: empty axis")
    return values


def read_config(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment.  Keys use flag names."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve(args) -> dict:
    """Built-in defaults < config file < command-line flags."""
    values = dict(DEFAULTS)
    if args.config:
        values.update(read_config(args.config))
    values.update({k: v for k, v in vars(args).items() if k in DEFAULTS and v is not None})
    return values


def _int(values, key, minimum):
    try:
        v = int(float(values[key]))
    except (TypeError, ValueError):
        raise UsageError(f"--{key.replace('_', '-')} must be an integer") from None
    if v < minimum:
        raise UsageError(f"--{key.replace('_', '-')} must be >= {minimum}, got {v}")
    return v


def _basis(values, gamma):
    tail_tol = parse_number(values["tail_tol"])
    if not 0 < tail_tol < 1:
        raise UsageError("--tail-tol must lie in (0, 1)")
    if values["modes"] is not None:
        return ModeBasis(_int(values, "modes", 0), tail_tol)
    return ModeBasis.for_gamma(gamma, tail_tol)


def _point_label(point):
    return ", ".join(f"{k}={fmt(v)}" for k, v in zip(SWEEP_AXES, point))


def evaluate_point(point, values=None, nan_on_domain=False):
    """Sweep row for one ``(r, theta, g2, ns_kappa, d_over_2omega)`` point."""
    r, theta, g2, ns_kappa, gamma = point
    values = values or DEFAULTS
    try:
        source = SourceParams(n_s=ns_kappa, g2=g2, r=r, theta=theta)
        if gamma < 0:
            raise ParameterError(f"d_over_2omega must be non-negative, got {gamma}")
    except ParameterError as exc:
        raise UsageError(f"{_point_label(point)}: {exc}") from None
    d = 2.0 * gamma
    try:
        if values["method"] == "numeric":
            # without --modes the mode sum extends itself until converged
            basis = _basis(values, gamma) if values["modes"] is not None else None
            rep = sensitivity.total(source, UNIT_OPTICS, d, basis, method="numeric")
        else:
            rep = sensitivity.total(source, UNIT_OPTICS, d)
    except DomainError as exc:
        if not nan_on_domain:
            raise PointError(f"{_point_label(point)}: {exc}") from None
        r_rim = sensitivity.rim_normalized(source, UNIT_OPTICS, d)
        return list(point) + [r_rim, math.nan, math.nan, total_count(source, UNIT_OPTICS, d), math.nan]
    except (ConvergenceError, ParameterError) as exc:
        raise PointError(f"{_point_label(point)}: {exc}") from None
    return list(point) + [rep.r_rim, rep.r_tpd, rep.r_total, rep.n_d, rep.var_d]


def evaluate_grid(axes: dict, values=None, nan_on_domain=False) -> list[list]:
    """Rows for the product of ``axes`` in lexicographic axis order."""
    points = list(itertools.product(*(axes[k] for k in SWEEP_AXES)))
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        return list(pool.map(lambda p: evaluate_point(p, values, nan_on_domain), points))


def write_csv(path, columns, rows):
    text = ",".join(columns) + "\n" + "".join(",".join(fmt(v) for v in row) + "\n" for row in rows)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


# -- sweep ----------------------------------------------------------------------


def cmd_sweep(args) -> int:
    values = resolve(args)
    if values["method"] not in ("closed", "numeric"):
        raise UsageError(f"--method must be closed or numeric, got {values['method']!r}")
    axes = {k: parse_axis(k, values[k]) for k in SWEEP_AXES}
    rows = evaluate_grid(axes, values)
    write_csv(args.out, SWEEP_COLUMNS, rows)
    return 0


# -- figures --------------------------------------------------------------------


def _steps(start, stop, step):
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


GAMMA_AXIS = _steps(0.05, 3.0, 0.05)
R_AXIS = _steps(0.0, 1.0, 0.02)
FIG3A_R = [0.3, 0.5, 0.7, 1.0]
FIG3A_G2 = _steps(0.0, 2.0, 0.05)
FIG3B_G2 = [0.5, 1.0, 2.0]
FIG5_THETA = [round(math.pi * k / 20, 12) for k in range(21)]
FIGURES = ("fig2", "fig3a", "fig3b", "fig4", "fig5")


def figure_tables(preset: str) -> dict:
    """``{filename: (columns, rows)}`` for a figure preset (text files as str)."""
    if preset == "fig2":
        axes = dict(r=R_AXIS, theta=[0.0], g2=[1.0], ns_kappa=[0.9], d_over_2omega=GAMMA_AXIS)
        return {"fig2.csv": (SWEEP_COLUMNS, evaluate_grid(axes))}
    if preset == "fig3a":
        axes = dict(r=FIG3A_R, theta=[0.0], g2=FIG3A_G2, ns_kappa=[0.9], d_over_2omega=[0.5])
        rows = evaluate_grid(axes, nan_on_domain=True)
        return {"fig3a.csv": (SWEEP_COLUMNS, rows), "fig3a_report.txt": _domain_report(rows)}
    if preset == "fig3b":
        axes = dict(r=[0.5], theta=[0.0], g2=FIG3B_G2, ns_kappa=[0.9], d_over_2omega=GAMMA_AXIS)
        rows = evaluate_grid(axes, nan_on_domain=True)
        return {"fig3b.csv": (SWEEP_COLUMNS, rows), "fig3b_report.txt": _domain_report(rows)}
    if preset == "fig4":
        t_axis = _steps(0.0, 1.0, 0.02)
        rows = [["incoherent", "T", t, sensitivity.baseline("incoherent")] for t in t_axis]
        rows += [["mutually_coherent", "T", t, sensitivity.baseline("mutually_coherent", t)] for t in t_axis]
        rows += [["entangled", "r", r, sensitivity.baseline("entangled", r)] for r in R_AXIS]
        return {"fig4.csv": (("curve", "parameter", "value", "R_total"), rows)}
    if preset == "fig5":
        axes = dict(r=R_AXIS, theta=[round(math.pi, 12)], g2=[1.0], ns_kappa=[0.9], d_over_2omega=GAMMA_AXIS)
        slice_axes = dict(r=[0.5], theta=FIG5_THETA, g2=[1.0], ns_kappa=[0.9], d_over_2omega=GAMMA_AXIS)
        return {
            "fig5.csv": (SWEEP_COLUMNS, evaluate_grid(axes)),
            "fig5_theta.csv": (SWEEP_COLUMNS, evaluate_grid(slice_axes)),
            "fig5_report.txt": _ratio_report(),
        }
    raise UsageError(f"unknown figure preset {preset!r}; choose from {', '.join(FIGURES)}")


def _domain_report(rows) -> str:
    bad = [row for row in rows if math.isnan(row[SWEEP_COLUMNS.index("R_total")])]
    lines = [f"grid points: {len(rows)}", f"points with non-positive total-count variance: {len(bad)}"]
    lines += ["  " + _point_label(row[:5]) for row in bad]
    return "\n".join(lines) + "\n"


def _ratio_report() -> str:
    ratio, best = errata.tpd_ratio()
    return (
        "best normalized TPD over d/2omega in (0, 3], r=0.5, g2=1\n"
        f"theta=0:  {best[0.0][1]:.12g} at d/2omega={best[0.0][0]:.12g}\n"
        f"theta=pi: {best[math.pi][1]:.12g} at d/2omega={best[math.pi][0]:.12g}\n"
        f"ratio theta=0 / theta=pi: {ratio:.12g}\n"
        f"quoted value {errata.QUOTED_TPD_RATIO} is not reproduced and is left unverified\n"
    )


def _plot(name, columns, rows, out_dir):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    if name == "fig4.csv":
        for curve in ("incoherent", "mutually_coherent", "entangled"):
            pts = [(row[2], row[3]) for row in rows if row[0] == curve]
            ax.plot(*zip(*pts), label=curve)
        ax.set_xlabel("T or r")
        ax.set_ylabel("R_total (d -> 0)")
        ax.legend()
    else:
        arr = np.array(rows, dtype=float)
        col = {c: arr[:, i] for i, c in enumerate(columns)}
        if name.startswith("fig3a"):
            for r in np.unique(col["r"]):
                sel = col["r"] == r
                ax.plot(col["g2"][sel], col["R_total"][sel], label=f"r={r:g}")
            ax.set_xlabel("g2")
        elif name.startswith("fig3b"):
            for g2 in np.unique(col["g2"]):
                sel = col["g2"] == g2
                ax.plot(col["d_over_2omega"][sel], col["R_total"][sel], label=f"g2={g2:g}")
            ax.set_xlabel("d / 2 omega")
        else:
            key = "theta" if name == "fig5_theta.csv" else "r"
            ys = np.unique(col[key])
            xs = np.unique(col["d_over_2omega"])
            grid = col["R_total"].reshape(len(ys), len(xs))
            mesh = ax.pcolormesh(xs, ys, grid, shading="auto")
            fig.colorbar(mesh, ax=ax, label="R_total")
            ax.set_xlabel("d / 2 omega")
            ax.set_ylabel(key)
        if ax.get_legend_handles_labels()[0]:
            ax.set_ylabel("R_total")
            ax.legend()
    fig.tight_layout()
    fig.savefig(Path(out_dir) / (Path(name).stem + ".svg"), metadata={"Date": None})
    plt.close(fig)


def cmd_figure(args) -> int:
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, table in figure_tables(args.preset).items():
        if isinstance(table, str):
            with open(out_dir / name, "w", newline="\n") as fh:
                fh.write(table)
            continue
        write_csv(out_dir / name, *table)
        if args.plot:
            _plot(name, *table, out_dir)
    return 0


# -- montecarlo -----------------------------------------------------------------


def cmd_montecarlo(args) -> int:
    values = resolve(args)
    scalars = {}
    for key in SWEEP_AXES:
        axis = parse_axis(key, values[key])
        if len(axis) != 1:
            raise UsageError(f"--{key.replace('_', '-')} must be a single value for montecarlo")
        scalars[key] = axis[0]
    tau = _int(values, "tau", 1)
    trials = _int(values, "trials", 2)
    seed = _int(values, "seed", 0)
    try:
        sampler = Sampler.parse(values["sampler"])
        source = SourceParams(n_s=scalars["ns_kappa"], g2=scalars["g2"], r=scalars["r"], theta=scalars["theta"])
    except (ValueError, ParameterError) as exc:
        raise UsageError(str(exc)) from None
    gamma = scalars["d_over_2omega"]
    if gamma < 0:
        raise UsageError("--d-over-2omega must be non-negative")
    basis = _basis(values, gamma)
    try:
        run = run_trials(source, UNIT_OPTICS, 2.0 * gamma, tau, trials, seed, basis=basis, sampler=sampler)
    except ParameterError as exc:
        raise UsageError(str(exc)) from None
    except (DomainError, DegenerateEstimatorError, ConvergenceError) as exc:
        raise PointError(f"{_point_label([scalars[k] for k in SWEEP_AXES])}: {exc}") from None

    summary = [scalars[k] for k in SWEEP_AXES] + [
        run.tau, run.trials, run.seed, run.sampler.value, run.empirical_var, run.predicted_var,
        run.ratio, run.bias, run.bias_stderr, run.var_stderr,
    ]
    rows = [[i, est] for i, est in enumerate(run.estimates)]
    if args.out and args.out != "-":
        out = Path(args.out)
        write_csv(out, ("trial", "d_hat"), rows)
        write_csv(out.with_name(out.stem + "_summary.csv"), MC_SUMMARY_COLUMNS, [summary])
    write_csv(None, MC_SUMMARY_COLUMNS, [summary])
    return 0


# -- errata ---------------------------------------------------------------------


def cmd_errata(args) -> int:
    text = errata.report()
    if args.out and args.out != "-":
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spade-sense",
        description="Separation sensitivity of two entangled point sources measured by HG-mode demultiplexing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def params(p, ranges=True):
        kind = "scalar, comma list or start:stop:step" if ranges else "scalar"
        p.add_argument("--r", help=f"squeezing parameter ({kind}; default {DEFAULTS['r']})")
        p.add_argument("--theta", help=f"relative phase in radians, 'pi/2' style accepted ({kind}; default 0)")
        p.add_argument("--g2", help=f"second-order coherence of the input ({kind}; default {DEFAULTS['g2']})")
        p.add_argument("--ns-kappa", dest="ns_kappa", help=f"n_s * kappa ({kind}; default {DEFAULTS['ns_kappa']})")
        p.add_argument(
            "--d-over-2omega", dest="d_over_2omega",
            help=f"separation over twice the PSF width ({kind}; default {DEFAULTS['d_over_2omega']})",
        )
        p.add_argument("--modes", help="HG cutoff M (modes 0..M); default picked from --tail-tol")
        p.add_argument("--tail-tol", dest="tail_tol", help=f"neglected mode mass (default {DEFAULTS['tail_tol']})")
        p.add_argument("--config", help="key=value file; flags override it")

    sweep = sub.add_parser("sweep", help="evaluate sensitivities on a parameter grid, write CSV")
    params(sweep)
    sweep.add_argument("--method", choices=("closed", "numeric"), help="RIM from closed form (default) or mode sum")
    sweep.add_argument("--out", help="output CSV (default stdout)")
    sweep.set_defaults(func=cmd_sweep)

    fig = sub.add_parser("figure", help="write the CSV tables behind a figure preset")
    fig.add_argument("preset", help=f"one of {', '.join(FIGURES)}")
    fig.add_argument("--out", help="output directory (default .)")
    fig.add_argument("--plot", action="store_true", help="also write SVG plots (needs matplotlib)")
    fig.set_defaults(func=cmd_figure)

    mc = sub.add_parser("montecarlo", help="Monte Carlo check of the estimator variance")
    params(mc, ranges=False)
    mc.add_argument("--tau", help=f"shots per sample mean (default {DEFAULTS['tau']})")
    mc.add_argument("--trials", help=f"number of sample means (default {DEFAULTS['trials']})")
    mc.add_argument("--seed", help=f"RNG seed (default {DEFAULTS['seed']})")
    mc.add_argument("--sampler", choices=("gaussian", "poisson", "gaussian_clt", "poisson_independent"))
    mc.add_argument("--out", help="per-trial CSV; a *_summary.csv is written next to it")
    mc.set_defaults(func=cmd_montecarlo)

    err = sub.add_parser("errata", help="report printed-vs-implemented formula discrepancies")
    err.add_argument("--out", help="also write the report to this file")
    err.set_defaults(func=cmd_errata, config=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "config"):
        args.config = None
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except PointError as exc:
        print(f"spade-sense: numerical failure at {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
