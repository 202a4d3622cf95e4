"""Command-line front end.

Verbs: ``landscape`` (population-loss curves with largest-zero markers),
``runs`` (training-run correlation curves), ``sweep`` (hitting-time scaling
over dimensions), ``audit`` (polynomial-engine invariant matrix), ``perturb``
(non-symmetric deviation report).  Every command takes a YAML config plus
optional overrides and writes CSV (authoritative) and SVG files into the
output directory.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 partial
(some trials aborted).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from sphindex.cli.configs import (
    ConfigError,
    build_dist,
    build_link,
    load_config,
    schedule_args,
)
from sphindex.cli.output import SvgChart, write_csv, write_sidecar
from sphindex.dynamics import SgdConfig, TrialAborted, fit_loglog, run_batch
from sphindex.landscape import beta_coefficients, gaussian_profile
from sphindex.measures import make_rng, sample_unit_sphere
from sphindex.orthopoly import GegenbauerBasis, RootFindingError, get_basis, harmonic_dimension, quadrature
from sphindex.perturb import (
    chi,
    default_stein_suite,
    delta_estimates,
    projected_w1_estimate,
    stein_bound_check,
)

_OUT_ENV = "SPHINDEX_OUT"


def _out_dir(config: dict, args) -> Path:
    out = args.out or config.get("out") or os.environ.get(_OUT_ENV) or "sphindex-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _seed(config: dict, args) -> int:
    return int(args.seed if args.seed is not None else config.get("seed", 0))


# ---------------------------------------------------------------------------
# landscape
# ---------------------------------------------------------------------------


def cmd_landscape(config: dict, args) -> int:
    out = _out_dir(config, args)
    seed = _seed(config, args)
    degree = int(config.get("degree", 4))
    d_list = [int(d) for d in config.get("d_list", [50, 75, 100])]
    n_points = int(config.get("m_points", 401))
    grid = np.linspace(-1.0, 1.0, n_points)

    curve_rows, zero_rows, profile_rows, beta_rows = [], [], [], []
    chart = SvgChart(
        title=f"degree-{degree} harmonic landscape",
        xlabel="correlation m", ylabel=f"P_{degree}(m)",
    )
    for d in d_list:
        basis = get_basis(d, degree)
        values = basis.eval(degree, grid)
        report = basis.root_report(degree)
        from sphindex.links import LinkFunction
        from sphindex.measures import InputDistribution

        profile = beta_coefficients(
            LinkFunction.gegenbauer_pure(degree, d),
            InputDistribution.uniform_sphere(d),
            max_degree=max(degree + 4, 8),
        )
        loss = profile.loss(grid)
        pg = profile.projected_gradient(grid)
        for m, v, lo, g in zip(grid, values, loss, pg):
            curve_rows.append([d, float(m), float(v)])
            profile_rows.append([d, float(m), float(lo), float(g)])
        for j, beta in enumerate(profile.coeffs):
            beta_rows.append([d, j, float(beta)])
        zero_rows.append([d, report.largest_root])
        chart.add_line(grid, values, label=f"d={d}")
        chart.add_points([report.largest_root, -report.largest_root], [0.0, 0.0],
                         color="#111111")
    write_csv(out / "landscape_curve.csv", ["d", "m", "value"], curve_rows)
    write_csv(out / "landscape_profile.csv", ["d", "m", "loss", "projected_gradient"],
              profile_rows)
    write_csv(out / "beta_spectrum.csv", ["d", "j", "beta_j"], beta_rows)
    write_csv(out / "largest_zeros.csv", ["d", "largest_zero"], zero_rows)
    for name in ("landscape_curve.csv", "landscape_profile.csv", "beta_spectrum.csv",
                 "largest_zeros.csv"):
        write_sidecar(out / name, config, seed, "landscape")
    if config.get("plots", True) and not args.no_plots:
        chart.write(out / "landscape.svg")
    print(f"landscape: wrote {len(d_list)} curves to {out}")
    return 0


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


def _runs_group(config: dict, group: dict, seed_offset: int, base_seed: int):
    d = int(config["d"])
    link = build_link(config["link"], d)
    dist = build_dist(config["dist"], d)
    sched = schedule_args(config.get("schedule", {"name": "manual"}))
    steps = config.get("steps")
    record_points = int(config.get("record_points", 400))
    cfg = SgdConfig(
        d=d, link=link, dist=dist, steps=None if steps is None else int(steps),
        init=group.get("init", "uniform"), m0=group.get("m0"),
        stop_level=config.get("stop_level"),
        levels=tuple(config.get("levels", (0.5, 0.9))),
        seed=base_seed + seed_offset, track_l4=True, **sched,
    )
    stride = max(1, cfg.resolved_steps() // record_points)
    cfg = replace(cfg, record_stride=stride)
    return run_batch(cfg, int(config.get("trials", 20)))


def cmd_runs(config: dict, args) -> int:
    out = _out_dir(config, args)
    seed = _seed(config, args)
    groups = config.get("groups", [{"init": "uniform"}, {"init": "planted", "m0": 0.4}])
    traj_rows, summary_rows = [], []
    chart = SvgChart(title="correlation during training", xlabel="step",
                     ylabel="m", width=820)
    colors = {"uniform": "#d23f3f", "half_sphere": "#d23f3f", "planted": "#1f6fb4"}
    aborted = 0
    for g_idx, group in enumerate(groups):
        label = group.get("label") or group.get("init", f"group{g_idx}")
        trajectories = _runs_group(config, group, 1000 * g_idx, seed)
        for t_idx, tr in enumerate(trajectories):
            aborted += tr.status == "aborted"
            for t, m, r, gn, l4 in zip(tr.t_rec, tr.m_rec, tr.r_rec,
                                       tr.grad_norm_rec, tr.l4sq_rec):
                traj_rows.append([label, t_idx, int(t), float(m), float(r),
                                  float(gn), float(l4)])
            summary_rows.append([
                label, t_idx,
                -1 if tr.hitting.get(0.5) is None else tr.hitting[0.5],
                -1 if tr.hitting.get(0.9) is None else tr.hitting[0.9],
                tr.m_final, tr.status,
            ])
            chart.add_line(
                tr.t_rec, tr.m_rec, label=label if t_idx == 0 else "",
                color=colors.get(group.get("init", ""), "#2e8b57"),
                width=1.0, opacity=0.55,
            )
    write_csv(out / "trajectories.csv", ["init", "trial", "t", "m", "r", "grad_norm", "l4sq"],
              traj_rows)
    write_csv(out / "runs_summary.csv",
              ["init", "trial", "tau_half", "tau_strong", "m_final", "status"],
              summary_rows)
    for name in ("trajectories.csv", "runs_summary.csv"):
        write_sidecar(out / name, config, seed, "runs")
    if config.get("plots", True) and not args.no_plots:
        chart.write(out / "runs.svg")
    print(f"runs: {len(summary_rows)} trials across {len(groups)} groups -> {out}")
    return 4 if aborted else 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_cell(config: dict, base_seed: int, d: int) -> dict:
    link = build_link(config["link"], d)
    dist = build_dist(dict(config["dist"], d=d), d)
    sched = schedule_args(config.get("schedule", {"name": "s1"}))
    cfg = SgdConfig(
        d=d, link=link, dist=dist, horizon_factor=float(config.get("horizon_factor", 10.0)),
        init="half_sphere", stop_level=float(config.get("strong_level", 0.9)) + 0.02,
        levels=(float(config.get("weak_level", 0.5)), float(config.get("strong_level", 0.9))),
        seed=base_seed, track_l4=False, record_stride=10**7, **sched,
    )
    trajectories = run_batch(cfg, int(config.get("trials", 30)))
    weak = float(config.get("weak_level", 0.5))
    strong = float(config.get("strong_level", 0.9))
    return {
        "d": d,
        "tau_weak": [tr.hitting.get(weak) for tr in trajectories],
        "tau_strong": [tr.hitting.get(strong) for tr in trajectories],
        "m_final": [tr.m_final for tr in trajectories],
        "status": [tr.status for tr in trajectories],
    }


def cmd_sweep(config: dict, args) -> int:
    out = _out_dir(config, args)
    seed = _seed(config, args)
    d_list = [int(d) for d in config.get("d_list", [])]
    if not d_list:
        raise ConfigError("scaling sweep needs a nonempty d_list")
    threads = int(args.threads or config.get("threads", 1))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(_sweep_cell, [config] * len(d_list),
                                  [seed] * len(d_list), d_list))
    else:
        cells = [_sweep_cell(config, seed, d) for d in d_list]

    rows = []
    medians = []
    for cell in cells:
        taus = np.array([t if t is not None else -1 for t in cell["tau_weak"]])
        hits = taus[taus >= 0]
        medians.append(float(np.median(hits)) if hits.size else math.nan)
        for i, (tw, ts, mf, st) in enumerate(zip(cell["tau_weak"], cell["tau_strong"],
                                                 cell["m_final"], cell["status"])):
            rows.append([cell["d"], i, -1 if tw is None else tw,
                         -1 if ts is None else ts, mf, st])
    write_csv(out / "ensemble.csv",
              ["d", "trial", "tau_half", "tau_strong", "m_final", "status"], rows)
    fit = fit_loglog(np.array(d_list, dtype=float), np.array(medians))
    if fit is None:
        print("sweep warning: slope underdetermined (need >= 2 dimensions with hits)",
              file=sys.stderr)
        fit_row = [[math.nan, math.nan, math.nan, math.nan, math.nan, math.nan]]
    else:
        fit_row = [[fit.slope, fit.intercept, fit.slope_se, fit.ci_low, fit.ci_high,
                    fit.curvature]]
    write_csv(out / "scaling_fit.csv",
              ["slope", "intercept", "slope_se", "ci_low", "ci_high", "curvature"],
              fit_row)
    for name in ("ensemble.csv", "scaling_fit.csv"):
        write_sidecar(out / name, config, seed, "sweep")
    if config.get("plots", True) and not args.no_plots:
        chart = SvgChart(title="median weak-recovery time", xlabel="d",
                         ylabel="median steps", logx=True, logy=True)
        chart.add_points(d_list, medians, label="median")
        if fit is not None:
            xs = np.array(d_list, dtype=float)
            chart.add_line(xs, np.exp(fit.intercept) * xs**fit.slope,
                           label=f"slope {fit.slope:.2f}")
        chart.write(out / "scaling.svg")
    slope_txt = "nan" if fit is None else f"{fit.slope:.3f}"
    print(f"sweep: {len(d_list)} dimensions, slope={slope_txt} -> {out}")
    return 0


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------


def cmd_audit(config: dict, args) -> int:
    out = _out_dir(config, args)
    seed = _seed(config, args)
    j_max = int(config.get("j_max", 30))
    d_list = [int(d) for d in config.get("d_list", [4, 10, 50, 200])]
    n_nodes = int(config.get("n_nodes", max(2 * j_max + 16, 64)))
    checks = config.get(
        "checks",
        ["orthogonality", "norm", "endpoint", "derivative", "bracket",
         "interlacing", "upsilon_bound"],
    )
    rows = []
    rng = np.random.default_rng(seed)
    for d in d_list:
        basis = get_basis(d, j_max)
        rule = quadrature(d, n_nodes)
        table = basis.eval_table(rule.nodes)
        gram = (table * rule.prob_weights) @ table.T
        if "orthogonality" in checks:
            off = np.abs(gram - np.diag(np.diag(gram)))
            worst = np.unravel_index(np.argmax(off), off.shape)
            rows.append(["orthogonality", int(worst[1]), d, float(off[worst]),
                         1e-10, bool(off[worst] <= 1e-10)])
        if "norm" in checks:
            errs = [abs(gram[j, j] * harmonic_dimension(j, d) - 1.0) for j in range(j_max + 1)]
            j_bad = int(np.argmax(errs))
            rows.append(["norm", j_bad, d, float(errs[j_bad]), 1e-8,
                         bool(errs[j_bad] <= 1e-8)])
        if "endpoint" in checks:
            errs = [abs(basis.eval(j, 1.0) - 1.0) for j in range(j_max + 1)]
            j_bad = int(np.argmax(errs))
            rows.append(["endpoint", j_bad, d, float(errs[j_bad]), 1e-12,
                         bool(errs[j_bad] <= 1e-12)])
        if "derivative" in checks:
            worst = 0.0
            for _ in range(20):
                j = int(rng.integers(1, j_max + 1))
                t = float(rng.uniform(-0.99, 0.99))
                h = 1e-6
                fd = (basis.eval(j, t + h) - basis.eval(j, t - h)) / (2 * h)
                exact = basis.eval_derivative(j, t)
                worst = max(worst, abs(exact - fd) / max(abs(exact), 1e-8))
            rows.append(["derivative", j_max, d, worst, 1e-5, bool(worst <= 1e-5)])
        for j in range(3, j_max + 1):
            report = basis.root_report(j)
            if "bracket" in checks:
                lo, hi = report.bracket
                ok = lo <= report.largest_root <= hi
                rows.append(["bracket", j, d, report.largest_root, hi, bool(ok)])
            if "interlacing" in checks and j >= 2:
                prev = basis.roots(j - 1)
                ok = bool(np.all(report.roots[:-1] < prev) and np.all(prev < report.roots[1:]))
                rows.append(["interlacing", j, d, float(j), 0.0, ok])
            if "upsilon_bound" in checks:
                ups = basis.upsilon(j)
                bound = 10.0 * basis.upsilon_decay_bound(j)
                rows.append(["upsilon_bound", j, d, ups, bound, bool(ups <= bound)])
    write_csv(out / "audit.csv", ["check", "j", "d", "value", "bound", "passed"], rows)
    write_sidecar(out / "audit.csv", config, seed, "audit")
    failed = sum(1 for r in rows if not r[5])
    print(f"audit: {len(rows)} checks, {failed} failures -> {out}")
    return 3 if failed else 0


# ---------------------------------------------------------------------------
# perturb
# ---------------------------------------------------------------------------


def cmd_perturb(config: dict, args) -> int:
    out = _out_dir(config, args)
    seed = _seed(config, args)
    d = int(config["d"])
    link = build_link(config["link"], d)
    dist = build_dist(config["dist"], d)
    n = int(config.get("n_samples", 10**5))
    m_grid = config.get("m_grid", [round(0.1 * k, 1) for k in range(10)])
    profile = gaussian_profile(link)

    stein_lhs = stein_rhs = math.nan
    if config.get("stein_suite", True):
        worst = None
        for eta, test, sd in default_stein_suite():
            check = stein_bound_check(eta, test, sd)
            slack = check.rhs - check.lhs
            if worst is None or slack < worst[0]:
                worst = (slack, check)
        stein_lhs, stein_rhs = worst[1].lhs, worst[1].rhs
    w1_cfg = config.get("w1", {})
    w1 = projected_w1_estimate(
        dist,
        n_subspaces=int(w1_cfg.get("n_subspaces", 8)),
        n_per_subspace=int(w1_cfg.get("n_per_subspace", 512)),
        seed=seed,
    ).value

    rng = make_rng(seed, 51)
    star = sample_unit_sphere(rng, d)
    rows = []
    for idx, m in enumerate(m_grid):
        g = rng.standard_normal(d)
        w = g - (g @ star) * star
        w /= np.linalg.norm(w)
        theta = float(m) * star + math.sqrt(1.0 - float(m) ** 2) * w
        report = delta_estimates(dist, link, theta, star, n=n, seed=seed + idx,
                                 profile=profile)
        rows.append([
            idx, report.m, report.delta_l, report.delta_l_se,
            report.delta_grad, report.delta_grad_se, report.chi,
            stein_lhs, stein_rhs, w1,
        ])
    write_csv(
        out / "perturbation_report.csv",
        ["theta_id", "m", "delta_L", "se", "delta_gradL", "se_grad", "chi",
         "stein_lhs", "stein_rhs", "w1_lb"],
        rows,
    )
    write_sidecar(out / "perturbation_report.csv", config, seed, "perturb")
    if config.get("plots", True) and not args.no_plots:
        chart = SvgChart(title="deviation from the Gaussian landscape",
                         xlabel="m", ylabel="delta")
        chart.add_line([r[1] for r in rows], [r[2] for r in rows], label="delta_L")
        chart.add_line([r[1] for r in rows], [r[4] for r in rows], label="delta_gradL")
        chart.write(out / "perturbation.svg")
    print(f"perturb: {len(rows)} correlation points -> {out}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


_COMMANDS = {
    "landscape": (cmd_landscape, "landscape_curve"),
    "runs": (cmd_runs, "sgd_runs"),
    "sweep": (cmd_sweep, "scaling_sweep"),
    "audit": (cmd_audit, "polynomial_audit"),
    "perturb": (cmd_perturb, "perturbation_report"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphindex",
        description="single-index model landscapes and spherical SGD experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="output directory "
                       f"(default: config value or ${_OUT_ENV})")
        p.add_argument("--threads", type=int, default=None, help="worker processes")
        p.add_argument("--no-plots", action="store_true", help="skip SVG output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func, expected_kind = _COMMANDS[args.command]
    try:
        config = load_config(args.config)
        if config.get("kind") != expected_kind:
            raise ConfigError(
                f"{args.command} expects kind {expected_kind!r}, got {config.get('kind')!r}"
            )
        return func(config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RootFindingError, TrialAborted, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
