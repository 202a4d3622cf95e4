"""Online stochastic gradient descent on the sphere.

Each step draws a fresh input x, takes the spherical gradient of the
per-sample squared loss l(theta, x) = (phi(x.theta) - phi(x.theta*))^2 and
renormalizes:

    theta' = (theta - delta * grad_S l) / |theta - delta * grad_S l|,
    grad l = 2 (phi(x.theta) - phi(x.theta*)) * phi'(x.theta) * x,
    grad_S l = grad l - (grad l . theta) theta.

The correlation m_t = theta_t . theta* then satisfies the exact bookkeeping
identity m_{t+1} = (m_t - delta * grad_S l . theta*) / r_t with r_t the
normalizer, which the diagnostics record and the decomposition monitor splits
into population drift, martingale, and discretization parts.

Trials are embarrassingly parallel: every trial owns generator streams keyed
by (seed, role, trial_index), so a trial's trajectory is bit-identical whether
run alone or inside a lockstep-vectorized ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from sphindex.links import LinkFunction
from sphindex.measures import InputDistribution, make_rng, sample_unit_sphere, sample_with

_STREAM_THETA_STAR = 1
_STREAM_THETA_INIT = 2
_STREAM_DATA = 3

_CHUNK = 512


class TrialAborted(RuntimeError):
    """Non-finite gradient (link overflow) encountered."""


def step_size(schedule: str, d: int, eps: float, s: int | None = None) -> float:
    """Step-size presets: s1 -> eps/d; s2 -> eps/(d log d); s_ge3 -> eps d^(-s/2);
    strong -> eps/d (natural log throughout)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if schedule == "s1":
        return eps / d
    if schedule == "s2":
        return eps / (d * math.log(d))
    if schedule == "s_ge3":
        if s is None or s < 3:
            raise ValueError("schedule s_ge3 needs the exponent s >= 3")
        return eps * d ** (-s / 2.0)
    if schedule == "strong":
        return eps / d
    raise ValueError(f"unknown schedule {schedule!r} (manual schedules set delta directly)")


def default_horizon(schedule: str, d: int, eps: float, s: int | None = None, factor: float = 10.0) -> int:
    """Step budget matching the schedule's recovery-time scale, times ``factor``."""
    if schedule == "s1":
        base = d / eps
    elif schedule == "s2":
        base = d * math.log(d) ** 2 / eps
    elif schedule == "s_ge3":
        if s is None or s < 3:
            raise ValueError("schedule s_ge3 needs the exponent s >= 3")
        base = d ** (s - 1) / eps
    elif schedule == "strong":
        base = d * math.log(1.0 / min(eps, 0.5)) / eps
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    return int(math.ceil(factor * base))


@dataclass(frozen=True)
class SgdConfig:
    """One SGD experiment cell.

    ``schedule`` is "manual" (use ``delta``) or one of the presets of
    :func:`step_size`.  ``init`` is "uniform", "half_sphere" (uniform with the
    sign flipped to make m0 >= 0), or "planted" with correlation ``m0``.
    ``theta_star`` is "uniform" (per-trial random) or "axis" (first basis
    vector).  ``steps`` of None takes the schedule's default horizon.
    """

    d: int
    link: LinkFunction
    dist: InputDistribution
    schedule: str = "manual"
    delta: float | None = None
    eps: float = 0.5
    s: int | None = None
    steps: int | None = None
    horizon_factor: float = 10.0
    theta_star: str = "uniform"
    init: str = "uniform"
    m0: float | None = None
    stop_level: float | None = None
    levels: tuple[float, ...] = (0.5, 0.9)
    record_stride: int | None = None
    diagnostics: bool = False
    track_l4: bool = True
    seed: int = 0

    def resolved_delta(self) -> float:
        if self.schedule == "manual":
            if self.delta is None or self.delta <= 0:
                raise ValueError("manual schedule requires delta > 0")
            return self.delta
        return step_size(self.schedule, self.d, self.eps, self.s)

    def resolved_steps(self) -> int:
        if self.steps is not None:
            return int(self.steps)
        if self.schedule == "manual":
            raise ValueError("manual schedule requires explicit steps")
        return default_horizon(self.schedule, self.d, self.eps, self.s, self.horizon_factor)

    def with_dimension(self, d: int) -> "SgdConfig":
        """Same cell at another dimension, rescaling the input law to match."""
        if self.dist.kind == "uniform_sphere" and math.isclose(
            self.dist.radius, math.sqrt(self.dist.d)
        ):
            dist = InputDistribution.uniform_sphere(d)
        elif self.dist.kind == "gaussian":
            dist = InputDistribution.gaussian(d)
        elif self.dist.kind == "product":
            dist = InputDistribution.product(d, self.dist.eta)
        else:
            raise ValueError(f"cannot transport {self.dist.kind} across dimensions")
        return replace(self, d=d, dist=dist)


class StepDiagnostics(NamedTuple):
    r: float
    proj_sl: float  # grad_S l . theta*
    grad_sq: float  # |grad l|^2
    loss: float


def sgd_step(theta: np.ndarray, x: np.ndarray, delta: float, link: LinkFunction,
             theta_star: np.ndarray) -> tuple[np.ndarray, StepDiagnostics]:
    """One spherical SGD step for a single unit vector."""
    u = float(x @ theta)
    u_star = float(x @ theta_star)
    e = float(link(u)) - float(link(u_star))
    coef = 2.0 * e * float(link.deriv(u))
    if not math.isfinite(coef):
        raise TrialAborted(f"non-finite gradient coefficient at u={u:g}")
    g_sphere = coef * x - (coef * u) * theta
    moved = theta - delta * g_sphere
    r = float(np.linalg.norm(moved))
    m = float(theta @ theta_star)
    diag = StepDiagnostics(
        r=r,
        proj_sl=coef * (u_star - m * u),
        grad_sq=coef * coef * float(x @ x),
        loss=e * e,
    )
    return moved / r, diag


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticsRecord:
    """Per-step series kept when diagnostics are enabled (single trial)."""

    m: np.ndarray          # length steps+1, m_0 .. m_T
    r: np.ndarray          # length steps, normalizers
    proj_sl: np.ndarray    # length steps, grad_S l . theta*
    grad_sq: np.ndarray    # length steps, |grad l|^2
    moment_sums: dict      # running sums for the moment-growth estimates
    n_steps: int


@dataclass
class SgdTrajectory:
    """Recorded run of one trial."""

    d: int
    delta: float
    steps: int
    status: str                      # "ok" | "stopped" | "aborted"
    t_rec: np.ndarray
    m_rec: np.ndarray
    r_rec: np.ndarray
    grad_norm_rec: np.ndarray
    l4sq_rec: np.ndarray
    hitting: dict[float, int | None]
    m_final: float
    sup_l4sq: float
    theta_star: np.ndarray
    diag: DiagnosticsRecord | None = None

    def hitting_time(self, level: float) -> int | None:
        return self.hitting.get(level)


def _build_theta_star(config: SgdConfig, trial: int) -> np.ndarray:
    if isinstance(config.theta_star, str):
        if config.theta_star == "axis":
            v = np.zeros(config.d)
            v[0] = 1.0
            return v
        if config.theta_star == "uniform":
            return sample_unit_sphere(make_rng(config.seed, _STREAM_THETA_STAR, trial), config.d)
        raise ValueError(f"unknown theta_star spec {config.theta_star!r}")
    v = np.asarray(config.theta_star, dtype=float)
    return v / np.linalg.norm(v)


def _build_theta0(config: SgdConfig, trial: int, theta_star: np.ndarray) -> np.ndarray:
    rng = make_rng(config.seed, _STREAM_THETA_INIT, trial)
    if config.init == "planted":
        if config.m0 is None or not -1.0 < config.m0 < 1.0:
            raise ValueError("planted init needs m0 in (-1, 1)")
        g = rng.standard_normal(config.d)
        w = g - (g @ theta_star) * theta_star
        w /= np.linalg.norm(w)
        return config.m0 * theta_star + math.sqrt(1.0 - config.m0**2) * w
    theta0 = sample_unit_sphere(rng, config.d)
    if config.init == "half_sphere" and theta0 @ theta_star < 0.0:
        theta0 = -theta0
    elif config.init not in ("uniform", "half_sphere"):
        raise ValueError(f"unknown init spec {config.init!r}")
    return theta0


class _BatchState:
    """Lockstep simulation of n trials sharing (d, link, dist, delta)."""

    def __init__(self, config: SgdConfig, trials: int):
        self.config = config
        self.n = trials
        self.d = config.d
        self.delta = config.resolved_delta()
        self.steps = config.resolved_steps()
        self.theta_star = np.stack([_build_theta_star(config, i) for i in range(trials)])
        self.theta = np.stack(
            [_build_theta0(config, i, self.theta_star[i]) for i in range(trials)]
        )
        self.rngs = [make_rng(config.seed, _STREAM_DATA, i) for i in range(trials)]
        self.m = np.einsum("ij,ij->i", self.theta, self.theta_star)
        self.active = np.ones(trials, dtype=bool)
        self.status = np.array(["ok"] * trials, dtype=object)
        self.levels = tuple(sorted(set(config.levels)))
        self.hit = {lv: np.where(self.m >= lv, 0, -1).astype(np.int64) for lv in self.levels}
        self.sup_l4sq = self._l4sq() if config.track_l4 else np.zeros(trials)
        stride = config.record_stride
        if stride is None:
            stride = max(1, self.steps // 10_000)
        self.stride = max(1, int(stride))
        self.rec_t = [0]
        self.rec_m = [self.m.copy()]
        self.rec_r = [np.ones(trials)]
        self.rec_gn = [np.zeros(trials)]
        self.rec_l4 = [self.sup_l4sq.copy()]
        if config.diagnostics:
            self.diag_m = np.empty((trials, self.steps + 1))
            self.diag_m[:, 0] = self.m
            self.diag_r = np.empty((trials, self.steps))
            self.diag_proj = np.empty((trials, self.steps))
            self.diag_gsq = np.empty((trials, self.steps))
            self.moment_sums = {
                "xstar_sq_csq": np.zeros(trials),
                "xtheta_sq_csq": np.zeros(trials),
                "xnorm2_csq": np.zeros(trials),
                "xnorm4_csq": np.zeros(trials),
            }
        self.steps_done = 0

    def _l4sq(self) -> np.ndarray:
        sq = self.theta * self.theta
        return np.sqrt(np.einsum("ij,ij->i", sq, sq))

    def run(self) -> None:
        cfg = self.config
        link = cfg.link
        delta = self.delta
        x_block = np.empty((self.n, _CHUNK, self.d))
        t = 0
        while t < self.steps and self.active.any():
            block = min(_CHUNK, self.steps - t)
            for i, rng in enumerate(self.rngs):
                x_block[i, :block] = sample_with(cfg.dist, rng, block)
            ustar_block = np.einsum("nbd,nd->nb", x_block[:, :block], self.theta_star)
            with np.errstate(all="ignore"):
                f_ustar_block = np.asarray(link(ustar_block), dtype=float)
            for b in range(block):
                t += 1
                x = x_block[:, b, :]
                u = np.einsum("ij,ij->i", x, self.theta)
                u_star = ustar_block[:, b]
                with np.errstate(all="ignore"):
                    e = np.asarray(link(u), dtype=float) - f_ustar_block[:, b]
                    coef = 2.0 * e * np.asarray(link.deriv(u), dtype=float)
                    moved = (1.0 + delta * coef * u)[:, None] * self.theta - (
                        delta * coef
                    )[:, None] * x
                    r = np.sqrt(np.einsum("ij,ij->i", moved, moved))
                    theta_new = moved / r[:, None]
                ok = np.isfinite(coef) & np.isfinite(r) & (r > 0.0)
                aborted = self.active & ~ok
                if aborted.any():
                    self.status[aborted] = "aborted"
                    self.active[aborted] = False
                upd = self.active & ok
                proj_sl = coef * (u_star - self.m * u)
                self.theta[upd] = theta_new[upd]
                m_new = np.einsum("ij,ij->i", self.theta, self.theta_star)
                self.m = np.where(upd, m_new, self.m)
                for lv in self.levels:
                    fresh = upd & (self.hit[lv] < 0) & (self.m >= lv)
                    self.hit[lv][fresh] = t
                need_xsq = cfg.diagnostics or (t % self.stride == 0) or t == self.steps
                if need_xsq:
                    x_sq = np.einsum("ij,ij->i", x, x)
                    grad_sq = coef * coef * x_sq
                else:
                    grad_sq = None
                if cfg.track_l4:
                    l4 = self._l4sq()
                    self.sup_l4sq = np.where(upd, np.maximum(self.sup_l4sq, l4), self.sup_l4sq)
                else:
                    l4 = np.zeros(self.n)
                if cfg.diagnostics:
                    idx = t - 1
                    self.diag_m[:, t] = self.m
                    self.diag_r[:, idx] = r
                    self.diag_proj[:, idx] = proj_sl
                    self.diag_gsq[:, idx] = grad_sq
                    c_sq = (np.asarray(link.deriv(u), dtype=float) * f_ustar_block[:, b]) ** 2
                    self.moment_sums["xstar_sq_csq"] += u_star**2 * c_sq
                    self.moment_sums["xtheta_sq_csq"] += u**2 * c_sq
                    self.moment_sums["xnorm2_csq"] += x_sq * c_sq
                    self.moment_sums["xnorm4_csq"] += x_sq**2 * c_sq
                if t % self.stride == 0 or t == self.steps:
                    self.rec_t.append(t)
                    self.rec_m.append(self.m.copy())
                    self.rec_r.append(np.where(upd, r, np.nan))
                    self.rec_gn.append(np.sqrt(np.where(upd, grad_sq, np.nan)))
                    self.rec_l4.append(l4.copy())
                if cfg.stop_level is not None:
                    stopped = upd & (self.m >= cfg.stop_level)
                    if stopped.any():
                        self.status[stopped] = "stopped"
                        self.active[stopped] = False
                self.steps_done = t
                if not self.active.any():
                    break
        if self.rec_t[-1] != self.steps_done:
            self.rec_t.append(self.steps_done)
            self.rec_m.append(self.m.copy())
            self.rec_r.append(np.full(self.n, np.nan))
            self.rec_gn.append(np.full(self.n, np.nan))
            self.rec_l4.append(self._l4sq() if cfg.track_l4 else np.zeros(self.n))

    def trajectory(self, trial: int) -> SgdTrajectory:
        cfg = self.config
        hitting = {
            lv: (int(self.hit[lv][trial]) if self.hit[lv][trial] >= 0 else None)
            for lv in self.levels
        }
        diag = None
        if cfg.diagnostics:
            n_steps = self.steps_done
            diag = DiagnosticsRecord(
                m=self.diag_m[trial, : n_steps + 1].copy(),
                r=self.diag_r[trial, :n_steps].copy(),
                proj_sl=self.diag_proj[trial, :n_steps].copy(),
                grad_sq=self.diag_gsq[trial, :n_steps].copy(),
                moment_sums={k: float(v[trial]) for k, v in self.moment_sums.items()},
                n_steps=n_steps,
            )
        return SgdTrajectory(
            d=self.d,
            delta=self.delta,
            steps=self.steps_done,
            status=str(self.status[trial]),
            t_rec=np.array(self.rec_t),
            m_rec=np.array([row[trial] for row in self.rec_m]),
            r_rec=np.array([row[trial] for row in self.rec_r]),
            grad_norm_rec=np.array([row[trial] for row in self.rec_gn]),
            l4sq_rec=np.array([row[trial] for row in self.rec_l4]),
            hitting=hitting,
            m_final=float(self.m[trial]),
            sup_l4sq=float(self.sup_l4sq[trial]),
            theta_star=self.theta_star[trial].copy(),
            diag=diag,
        )


def run_trial(config: SgdConfig, trial_index: int = 0) -> SgdTrajectory:
    """Run one trial; deterministic given (config, seed, trial_index)."""
    batch = _BatchState(config, trials=trial_index + 1)
    if trial_index > 0:
        # only the requested trial is of interest; deactivate the others
        batch.active[:trial_index] = False
    batch.run()
    return batch.trajectory(trial_index)


def run_batch(config: SgdConfig, trials: int) -> list[SgdTrajectory]:
    """Run ``trials`` lockstep trials and return their trajectories."""
    batch = _BatchState(config, trials)
    batch.run()
    return [batch.trajectory(i) for i in range(trials)]


# ---------------------------------------------------------------------------
# Ensembles and scaling fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    slope_se: float
    ci_low: float
    ci_high: float
    curvature: float  # quadratic coefficient of log tau in log d


@dataclass
class EnsembleResult:
    """Per-dimension trial outcomes plus the log-log scaling fit."""

    d_list: list[int]
    weak_level: float
    strong_level: float
    tau_weak: dict[int, np.ndarray]
    tau_strong: dict[int, np.ndarray]
    m_final: dict[int, np.ndarray]
    status: dict[int, np.ndarray]
    fit: ScalingFit | None

    def success_rate(self, d: int) -> float:
        return float(np.mean(self.tau_strong[d] >= 0))

    def weak_rate(self, d: int) -> float:
        return float(np.mean(self.tau_weak[d] >= 0))

    def median_tau_weak(self, d: int) -> float:
        hits = self.tau_weak[d][self.tau_weak[d] >= 0]
        return float(np.median(hits)) if hits.size else math.nan

    def strong_minus_weak(self, d: int) -> np.ndarray:
        """tau_strong - tau_weak over trials achieving both."""
        tw, ts = self.tau_weak[d], self.tau_strong[d]
        both = (tw >= 0) & (ts >= 0)
        return (ts - tw)[both]


def fit_loglog(d_values: np.ndarray, medians: np.ndarray) -> ScalingFit | None:
    mask = np.isfinite(medians) & (medians > 0)
    if mask.sum() < 2:
        return None
    lx = np.log(np.asarray(d_values, dtype=float)[mask])
    ly = np.log(medians[mask])
    coeffs, residuals, *_ = np.polyfit(lx, ly, 1, full=True)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    n = lx.size
    if n > 2 and residuals.size:
        sigma_sq = float(residuals[0]) / (n - 2)
        se = math.sqrt(sigma_sq / float(np.sum((lx - lx.mean()) ** 2)))
    else:
        se = math.nan
    curvature = float(np.polyfit(lx, ly, 2)[0]) if n >= 3 else math.nan
    half = 1.96 * se if math.isfinite(se) else math.nan
    return ScalingFit(
        slope=slope, intercept=intercept, slope_se=se,
        ci_low=slope - half, ci_high=slope + half, curvature=curvature,
    )


def run_ensemble(
    config: SgdConfig, trials: int, d_list, weak_level: float = 0.5,
    strong_level: float = 0.9,
) -> EnsembleResult:
    """Repeat the configured cell over dimensions, collect hitting times and
    fit the log-log scaling of the median weak-recovery time."""
    if trials < 1:
        raise ValueError("need at least one trial")
    d_list = [int(d) for d in d_list]
    if not d_list:
        raise ValueError("empty dimension list")
    levels = tuple(sorted({weak_level, strong_level, *config.levels}))
    tau_weak, tau_strong, m_final, status = {}, {}, {}, {}
    for d in d_list:
        cell = replace(config.with_dimension(d), levels=levels)
        batch = _BatchState(cell, trials)
        batch.run()
        if all(batch.status[i] == "aborted" for i in range(trials)):
            raise TrialAborted(f"all {trials} trials aborted at d={d}")
        tau_weak[d] = batch.hit[weak_level].copy()
        tau_strong[d] = batch.hit[strong_level].copy()
        m_final[d] = batch.m.copy()
        status[d] = batch.status.copy()
    medians = np.array(
        [
            np.median(tau_weak[d][tau_weak[d] >= 0]) if (tau_weak[d] >= 0).any() else math.nan
            for d in d_list
        ]
    )
    return EnsembleResult(
        d_list=d_list, weak_level=weak_level, strong_level=strong_level,
        tau_weak=tau_weak, tau_strong=tau_strong, m_final=m_final, status=status,
        fit=fit_loglog(np.array(d_list), medians),
    )


# ---------------------------------------------------------------------------
# Decomposition monitor and sparsity tracking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionSeries:
    """Cumulative drift / martingale / discretization split of m_T - m_0,
    plus empirical moment-growth constants from the sample stream."""

    t: np.ndarray
    m: np.ndarray
    drift: np.ndarray
    martingale: np.ndarray
    discretization: np.ndarray
    k_hat: float       # max of the two projected second-moment estimates
    k1_hat: float      # E[|x|^2 C^2] / d
    k2_hat: float      # E[|x|^4 C^2] / d^2
    identity_max_err: float

    @property
    def split_max_err(self) -> float:
        total = self.m[1:] - self.m[0]
        return float(np.max(np.abs(total - (self.drift + self.martingale + self.discretization))))


def monitor_decomposition(trajectory: SgdTrajectory, profile) -> DecompositionSeries:
    """Split the correlation increments using the exact update identity.

    ``profile`` supplies the population projected gradient (exact for
    symmetric inputs and for the Gaussian reference); the martingale part is
    the leftover stochastic projection.
    """
    if trajectory.diag is None:
        raise ValueError("trajectory was recorded without diagnostics")
    diag = trajectory.diag
    n = diag.n_steps
    m_prev = diag.m[:-1]
    pop_pg = np.asarray(profile.projected_gradient(m_prev), dtype=float)
    delta = trajectory.delta
    drift_inc = delta * pop_pg
    mart_inc = -delta * (diag.proj_sl + pop_pg)
    base = m_prev - delta * diag.proj_sl
    disc_inc = (1.0 / diag.r - 1.0) * base
    identity_err = float(np.max(np.abs(diag.m[1:] - base / diag.r))) if n else 0.0
    sums = diag.moment_sums
    d = trajectory.d
    return DecompositionSeries(
        t=np.arange(1, n + 1),
        m=diag.m,
        drift=np.cumsum(drift_inc),
        martingale=np.cumsum(mart_inc),
        discretization=np.cumsum(disc_inc),
        k_hat=max(sums["xstar_sq_csq"], sums["xtheta_sq_csq"]) / max(n, 1),
        k1_hat=sums["xnorm2_csq"] / max(n, 1) / d,
        k2_hat=sums["xnorm4_csq"] / max(n, 1) / d**2,
        identity_max_err=identity_err,
    )


@dataclass(frozen=True)
class SparsityReport:
    """Exceedance report for the conjectured sup_t ||theta_t||_4^2 threshold."""

    xi: float
    threshold: float
    sup_l4sq: np.ndarray
    exceeded: np.ndarray

    @property
    def any_exceeded(self) -> bool:
        return bool(self.exceeded.any())

    @property
    def exceedance_rate(self) -> float:
        return float(self.exceeded.mean())


def sparsity_tracker(trajectories, xi: float) -> SparsityReport:
    """Compare per-trial sup ||theta_t||_4^2 with sqrt(xi log T / d)."""
    if isinstance(trajectories, SgdTrajectory):
        trajectories = [trajectories]
    if not trajectories:
        raise ValueError("no trajectories given")
    steps = max(tr.steps for tr in trajectories)
    d = trajectories[0].d
    threshold = math.sqrt(xi * math.log(max(steps, 2)) / d)
    sups = np.array([tr.sup_l4sq for tr in trajectories])
    return SparsityReport(xi=xi, threshold=threshold, sup_l4sq=sups, exceeded=sups >= threshold)


def population_flow(profile, m0: float, delta: float, steps: int) -> np.ndarray:
    """Zero-noise discrete flow of the correlation under the population
    spherical gradient (two-dimensional reduction; exact for symmetric laws)."""
    m = np.empty(steps + 1)
    m[0] = m0
    vec = np.array([m0, math.sqrt(max(1.0 - m0 * m0, 0.0))])
    star = np.array([1.0, 0.0])
    for t in range(steps):
        lprime = float(profile.dloss(vec[0]))
        grad = lprime * (star - vec[0] * vec)
        moved = vec - delta * grad
        vec = moved / np.linalg.norm(moved)
        m[t + 1] = vec[0]
    return m
