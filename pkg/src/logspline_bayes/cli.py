"""Command-line harness: config parsing, subcommand dispatch, CSV and SVG output.

Subcommands: fit, rate, select, bf, entropy, verify. CSV files are the
reproducibility contract (byte-identical across reruns with the same config
and seed, at any thread count); SVG plots are a convenience. Exit codes:
0 success, 1 validation error, 2 property failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import verify as verify_mod
from .config import ConfigError, ExperimentConfig, build_family, load_config
from .entropy import covering_number, hausdorff_alpha_entropy, tail_bound_check
from .harness import (bf_experiment, cell_seed_value, r_min_constant,
                      rate_from_cells, run_adaptive_grid, selection_from_cells)
from .inference import run_posterior
from .priors import make_model_spec


class Table(NamedTuple):
    header: tuple[str, ...]
    rows: list[tuple]


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(table: Table, path) -> None:
    """RFC-4180 CSV with LF line endings and 17-significant-digit floats."""
    for row in table.rows:
        if len(row) != len(table.header):
            raise ValueError("table is not rectangular")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([_format_cell(v) for v in row])


def _plot_lines(path, series, xlabel, ylabel, loglog=False):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "logspline-bayes"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, x, y in series:
        ax.plot(x, y, marker="o", markersize=3, label=label)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _cells_table(name: str, cells, master_seed: int) -> Table:
    rows = []
    for c in cells:
        for k, gamma in enumerate(c.gammas):
            rows.append((name, c.n, c.replication, gamma, master_seed,
                         c.cell_seed, c.index_probs[k],
                         c.model_hellinger_median[k] if c.model_hellinger_median else math.nan,
                         c.model_l2_median[k] if c.model_l2_median else math.nan))
    return Table(("experiment", "n", "replication", "gamma", "master_seed",
                  "cell_seed", "index_posterior_mass", "hellinger_median",
                  "l2_median"), rows)


def _write_constants(cfg: ExperimentConfig, out: Path) -> None:
    if cfg.constants is None:
        return
    rows = [("base", r_min_constant(cfg.constants, "base"),
             int(cfg.constants.standing_assumption_ok)),
            ("refined", r_min_constant(cfg.constants, "refined"),
             int(cfg.constants.standing_assumption_ok))]
    write_csv(Table(("variant", "r_min", "standing_ok"), rows),
              out / "constants.csv")


def _run_rate(cfg: ExperimentConfig, out: Path) -> int:
    cells = run_adaptive_grid(cfg)
    result = rate_from_cells(cells, cfg)
    write_csv(_cells_table("rate", cells, cfg.master_seed), out / "rate_cells.csv")
    write_csv(Table(("experiment", "n", "replication", "master_seed", "cell_seed",
                     "mixture_hellinger_median", "mixture_l2_median"),
                    [("rate", c.n, c.replication, cfg.master_seed, c.cell_seed,
                      c.mixture_hellinger_median, c.mixture_l2_median)
                     for c in cells]),
              out / "rate_summary.csv")
    write_csv(Table(("experiment", "statistic", "slope", "intercept", "stderr",
                     "target", "tolerance", "within_tolerance"),
                    [("rate", "hellinger", result.hellinger_fit.slope,
                      result.hellinger_fit.intercept, result.hellinger_fit.stderr,
                      result.slope_target, result.slope_tol, int(result.passed)),
                     ("rate", "l2", result.l2_fit.slope, result.l2_fit.intercept,
                      result.l2_fit.stderr, result.slope_target, result.slope_tol,
                      int(abs(result.l2_fit.slope - result.slope_target)
                          <= result.slope_tol))]),
              out / "rate_slopes.csv")
    _write_constants(cfg, out)
    if cfg.plots:
        med = {n: np.median([c.mixture_hellinger_median for c in cells if c.n == n])
               for n in cfg.n_grid}
        xs = list(cfg.n_grid)
        _plot_lines(out / "rate.svg",
                    [("median Hellinger", xs, [med[n] for n in xs])],
                    "n", "posterior median distance", loglog=True)
    return 0


def _run_select(cfg: ExperimentConfig, out: Path) -> int:
    cells = run_adaptive_grid(cfg)
    result = selection_from_cells(cells, cfg)
    write_csv(_cells_table("select", cells, cfg.master_seed),
              out / "select_cells.csv")
    band_of = dict(result.band_by_n)
    write_csv(Table(("experiment", "n", "replication", "master_seed", "cell_seed",
                     "band_mass", "band_indices"),
                    [("select", n, rep, cfg.master_seed,
                      cell_seed_value(cfg.master_seed, n, rep), mass,
                      "|".join(str(g) for g in band_of[n]))
                     for (n, rep, mass) in result.band_mass]),
              out / "select_band.csv")
    write_csv(Table(("experiment", "n_max", "fraction_above", "mass_threshold",
                     "fraction_threshold", "passed"),
                    [("select", max(cfg.n_grid), result.fraction_at_max,
                      result.mass_threshold, result.fraction_threshold,
                      int(result.passed))]),
              out / "select_result.csv")
    _write_constants(cfg, out)
    if cfg.plots:
        med = {n: np.median([m for (nn, _, m) in result.band_mass if nn == n])
               for n in cfg.n_grid}
        xs = list(cfg.n_grid)
        _plot_lines(out / "select.svg",
                    [("median band mass", xs, [med[n] for n in xs])],
                    "n", "index posterior mass on band")
    return 0


def _run_bf(cfg: ExperimentConfig, out: Path) -> int:
    result = bf_experiment(cfg)
    write_csv(Table(("experiment", "n", "replication", "master_seed", "cell_seed",
                     "log_bf"),
                    [("bf", n, rep, cfg.master_seed, seed, lbf)
                     for (n, rep, seed, lbf) in result.rows]),
              out / "bf_cells.csv")
    write_csv(Table(("experiment", "replication", "drift_slope", "direction",
                     "matches_expected"),
                    [("bf", rep, s, "up" if s > 0 else "down",
                      int((s > 0) == (result.expected_direction == "up")))
                     for rep, s in enumerate(result.rep_slopes)]),
              out / "bf_result.csv")
    write_csv(Table(("experiment", "expected_direction", "match_fraction",
                     "fraction_threshold", "passed"),
                    [("bf", result.expected_direction, result.match_fraction,
                      result.fraction_threshold, int(result.passed))]),
              out / "bf_summary.csv")
    _write_constants(cfg, out)
    if cfg.plots:
        series = []
        for rep in range(cfg.replications):
            pts = [(n, lbf) for (n, r, _, lbf) in result.rows if r == rep]
            series.append((f"rep {rep}", [p[0] for p in pts], [p[1] for p in pts]))
        _plot_lines(out / "bf.svg", series, "n", "log Bayes factor")
    return 0


def _run_fit(cfg: ExperimentConfig, out: Path) -> int:
    try:
        data = np.loadtxt(cfg.data_path, ndmin=1)
    except OSError as e:
        raise ConfigError(f"cannot read data file: {e}") from None
    spec = make_model_spec(cfg.gamma, data.size, cfg.q, cfg.box_bound,
                           cfg.knot_scale, cfg.log_factor)
    run = run_posterior(spec, data, cfg.mcmc_draws, cfg.is_samples,
                        seed=cfg.master_seed)
    write_csv(Table(("gamma", "n", "K", "J", "log_marginal", "log_marginal_se",
                     "acceptance_rate", "master_seed"),
                    [(spec.gamma, spec.n, spec.K, spec.J, run.log_marginal,
                      run.log_marginal_se, run.acceptance_rate, cfg.master_seed)]),
              out / "fit_summary.csv")
    mean = run.draws.mean(axis=0)
    sd = run.draws.std(axis=0, ddof=1)
    write_csv(Table(("coefficient", "map_value", "posterior_mean", "posterior_sd"),
                    [(j, run.map.values[j], mean[j], sd[j])
                     for j in range(spec.J)]),
              out / "fit_coefficients.csv")
    if cfg.plots:
        from .density import LogSplineDensity
        grid = np.linspace(0.0, 1.0, 401)
        dens = LogSplineDensity(spec.basis, run.map)
        _plot_lines(out / "fit.svg", [("MAP density", grid, dens.pdf(grid))],
                    "x", "density")
    return 0


def _run_entropy(cfg: ExperimentConfig, out: Path) -> int:
    family = build_family(cfg.family)
    failed = False
    cov_rows = []
    alpha_rows = []
    for delta in cfg.deltas:
        exact = covering_number(family, delta, "exact")
        greedy = covering_number(family, delta, "greedy")
        cov_rows.append((delta, exact, greedy))
        total = family.total_mass()
        for alpha in cfg.alphas:
            j = hausdorff_alpha_entropy(family, delta, alpha)
            middle = total ** alpha * exact ** (1.0 - alpha)
            ok = math.exp(j) <= middle * (1 + 1e-12) and middle <= exact * (1 + 1e-12)
            failed = failed or not ok
            alpha_rows.append((delta, alpha, j, middle, exact, int(ok)))
    write_csv(Table(("delta", "covering_exact", "covering_greedy"), cov_rows),
              out / "entropy_covering.csv")
    write_csv(Table(("delta", "alpha", "alpha_entropy", "mass_covering_bound",
                     "covering_number", "sandwich_ok"), alpha_rows),
              out / "entropy_alpha.csv")
    if cfg.tail_bound is not None:
        p = cfg.tail_bound
        rng = np.random.default_rng(cfg.master_seed)
        report = tail_bound_check(family, p.r, p.eps, p.alpha, p.n,
                                     p.replications, rng)
        failed = failed or not report.passed
        write_csv(Table(("r", "eps", "alpha", "n", "replications", "master_seed",
                         "lhs_estimate", "lhs_se", "rhs_bound", "passed"),
                        [(p.r, p.eps, p.alpha, p.n, p.replications,
                          cfg.master_seed, report.lhs_estimate, report.lhs_se,
                          report.rhs_bound, int(report.passed))]),
                  out / "tail_bound.csv")
    return 2 if failed else 0


def run(argv) -> int:
    """Entry point; returns the process exit code."""
    parser = argparse.ArgumentParser(
        prog="logspline-bayes",
        description="Adaptive Bayesian log-spline density estimation harness")
    parser.add_argument("subcommand",
                        choices=["fit", "rate", "select", "bf", "entropy", "verify"])
    parser.add_argument("--config", metavar="PATH",
                        help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config master seed")
    parser.add_argument("--out", metavar="DIR", default=None,
                        help="override the config output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="override the config worker count")
    args = parser.parse_args(argv)

    if args.subcommand == "verify":
        return 0 if verify_mod.run_all() else 2

    if args.config is None:
        print("error: --config is required for this subcommand", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config, args.seed, args.out, args.threads)
        if cfg.experiment != args.subcommand:
            raise ConfigError(
                f"key 'experiment' is {cfg.experiment!r} but the subcommand "
                f"is {args.subcommand!r}")
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dispatch = {"rate": _run_rate, "select": _run_select, "bf": _run_bf,
                    "fit": _run_fit, "entropy": _run_entropy}
        return dispatch[args.subcommand](cfg, out)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
