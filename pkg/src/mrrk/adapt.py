"""Adaptive single-rate driver and the self-adjusting multi-rate controller.

The multi-rate controller takes a tentative global step with an embedded
error estimate, ranks the per-component error quotients, and either
rejects the step, accepts it outright, or keeps the slow components and
re-integrates only the fast ones on the same interval with adaptive
sub-steps, reading interpolated slow values from the global step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import odecore
from .interp import DENSE, HERMITE, InterpolatorKind
from .newton import ConvergenceFailure, JacobianCache, NewtonConfig
from .odecore import (NumericalBlowup, OdeProblem, StepSafety, WorkCounters,
                      error_quotients, new_step_size, rk_step)
from .tableaux import ButcherTableau


class IntegrationFailure(Exception):
    """The step size fell below the configured minimum.

    Carries the time, state, and statistics at the point of failure.
    """

    def __init__(self, message, t=None, y=None, stats=None):
        super().__init__(message)
        self.t = t
        self.y = y
        self.stats = stats


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and controller settings for one integration run."""

    rtol: float = 1e-6
    atol: float = 1e-6
    alpha: float = 0.9
    alpha_min: float = 0.5
    alpha_max: float = 1.2
    beta: float = 1.0
    phi: float = 0.1
    h0: Optional[float] = None
    h_min: float = 1e-12
    mode: str = "single"
    interp: Optional[InterpolatorKind] = None
    jacobian_strategy: str = "JacB"
    newton_max_iters: int = 20
    stage_guess: str = "explicit-part"
    t_eval: Optional[np.ndarray] = None
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not 0 < self.alpha_min < 1 < self.alpha_max:
            raise ValueError("require 0 < alpha_min < 1 < alpha_max")
        if not 0 < self.phi < 1:
            raise ValueError("phi must lie in (0, 1)")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.mode not in ("single", "multi"):
            raise ValueError("mode must be 'single' or 'multi'")
        if self.stage_guess not in ("explicit-part", "extrapolate"):
            raise ValueError(
                "stage_guess must be 'explicit-part' or 'extrapolate'")

    @property
    def safety(self) -> StepSafety:
        return StepSafety(self.alpha, self.alpha_min, self.alpha_max)

    def newton_config(self) -> NewtonConfig:
        return NewtonConfig(max_iters=self.newton_max_iters,
                            rel_tol=0.01 * self.rtol,
                            abs_tol=0.01 * self.atol,
                            strategy=self.jacobian_strategy)


@dataclass(frozen=True)
class Partition:
    """Fast/slow split of the state indices for one global step."""

    fast: np.ndarray
    slow: np.ndarray

    @property
    def d_n(self) -> int:
        return len(self.fast)


@dataclass
class StepStats:
    """Counters of a run, split into global and fast (local) work."""

    accepted_global: int = 0
    rejected_global_error: int = 0
    rejected_global_convergence: int = 0
    accepted_fast: int = 0
    rejected_fast_error: int = 0
    rejected_fast_convergence: int = 0
    global_rhs_calls: int = 0
    global_jacobians: int = 0
    local_rhs_calls: int = 0
    local_jacobians: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class ActivityRecord:
    """One accepted step: which components were advanced over what span."""

    step_index: int
    t_start: float
    t_end: float
    kind: str                     # "global" or "fast"
    active_indices: np.ndarray


@dataclass
class IntegrationResult:
    """Accepted trajectory, counters, and per-step activity."""

    t: np.ndarray
    y: np.ndarray
    stats: StepStats
    activity: list
    t_out: Optional[np.ndarray] = None
    y_out: Optional[np.ndarray] = None
    method: str = ""
    mode: str = "single"


def select_partition(eta: np.ndarray, phi: float, beta: float):
    """Classify a tentative global step from its error quotients.

    Sorts eta descending (ties broken by ascending index), caps the fast
    candidate count at m with m/N <= phi < (m+1)/N, and returns
    (decision, partition, eta_s, eta_f) where decision is one of
    "accept", "reject", "go_multirate".  eta_s is the largest quotient
    outside the top-m, eta_f the largest inside.  The fast set contains
    the top-m candidates that actually violate beta.
    """
    eta = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta)):
        raise ValueError("error quotients must be finite")
    N = len(eta)
    order = np.argsort(-eta, kind="stable")
    m = int(np.floor(phi * N))
    top = order[:m]
    rest = order[m:]
    eta_s = float(np.max(eta[rest]))
    eta_f = float(np.max(eta[top])) if m > 0 else 0.0
    if eta_s > beta:
        decision = "reject"
        fast = np.array([], dtype=int)
    elif eta_f <= beta:
        decision = "accept"
        fast = np.array([], dtype=int)
    else:
        decision = "go_multirate"
        fast = np.sort(top[eta[top] > beta])
    slow = np.setdiff1d(np.arange(N), fast, assume_unique=True)
    return decision, Partition(fast=fast, slow=slow), eta_s, eta_f


class _GuessExtrapolator:
    """Implicit-stage initial guesses by extrapolating the previous step.

    Evaluates the previous accepted step's continuous output beyond its
    own interval; this is the one place extrapolation is intentional, so
    it bypasses the public dense_eval domain check.  Extrapolation is a
    good guess on smooth trajectories but degrades Newton robustness on
    switching fronts, so it is opt-in via SolverConfig.stage_guess.
    """

    def __init__(self):
        self.stages = None

    def update(self, stages):
        self.stages = stages

    def __call__(self, k, t_stage):
        st = self.stages
        if st is None or st.dense is None or st.h <= 0:
            return None
        tau = (t_stage - st.t_n) / st.h
        W = st.dense.weights(np.array([tau]))
        return st.u_n + st.h * (W @ st.K)[0]


class _NoGuess:
    """Default guess source: fall back to the accumulated explicit part."""

    def update(self, stages):
        pass

    def __call__(self, k, t_stage):
        return None


def _make_guesser(cfg: SolverConfig):
    if cfg.stage_guess == "extrapolate":
        return _GuessExtrapolator()
    return _NoGuess()


def _attempt_global_step(problem, u_n, t_n, h, method, cfg, cache, guesser):
    """One tentative step with an error estimate.

    Methods with an embedded pair use it directly.  Methods without one
    (the classical explicit method) estimate the error by step doubling:
    the step is repeated as two half steps and the difference between the
    one-step and two-step results serves as the error, with the two-step
    result carried forward.  Returns
    (u_next, eta, stages, f_next, work); ``stages`` always spans the full
    interval [t_n, t_n + h] for interpolation.
    """
    nc = cfg.newton_config()
    if method.b_hat is not None:
        u_next, u_hat, stages, work = rk_step(
            problem, u_n, t_n, h, method, newton=nc, cache=cache,
            stage_guess=guesser)
        eta = error_quotients(u_next, u_hat, cfg.rtol, cfg.atol)
        return u_next, eta, stages, None, work
    # Step doubling.
    u_full, _, stages, work = rk_step(problem, u_n, t_n, h, method)
    u_half, _, _, w2 = rk_step(problem, u_n, t_n, 0.5 * h, method)
    work += w2
    u_next, _, _, w3 = rk_step(problem, u_half, t_n + 0.5 * h, 0.5 * h,
                               method)
    work += w3
    eta = error_quotients(u_next, u_full, cfg.rtol, cfg.atol)
    return u_next, eta, stages, None, work


def _make_interpolant(problem, method, cfg, u_n, u_next, t_n, h, stages,
                      work):
    """Slow-value interpolant over [t_n, t_n + h] restricted to columns.

    Returns a function cols -> (tau -> values at cols).  Methods with
    continuous output use it; others fall back to cubic Hermite in the
    endpoint states and derivatives (one fresh RHS call for the right
    endpoint, counted in ``work``).
    """
    kind = cfg.interp
    if kind is None:
        kind = DENSE if method.dense is not None else HERMITE
    if kind.kind == "dense" and method.dense is None:
        kind = HERMITE
    if kind.kind == "dense":
        K = stages.K
        W_cache = {}

        def make(cols):
            Kc = K[:, cols]
            u0 = u_n[cols]

            def interp(tau):
                w = W_cache.get(tau)
                if w is None:
                    w = stages.dense.weights(np.array([tau]))[0]
                    W_cache[tau] = w
                return u0 + h * (w @ Kc)
            return interp
        return make

    f_n = stages.K[0] if method.explicit_first_stage else None
    if f_n is None:
        f_n = np.empty_like(u_n)
        problem.rhs(u_n, t_n, f_n)
        work.rhs_calls += 1
    f_next = np.empty_like(u_n)
    problem.rhs(u_next, t_n + h, f_next)
    work.rhs_calls += 1

    if kind.kind == "linear":
        def make(cols):
            a, bb = u_n[cols], u_next[cols]

            def interp(tau):
                return (1.0 - tau) * a + tau * bb
            return interp
        return make

    def make(cols):
        a, bb = u_n[cols], u_next[cols]
        fa, fb = f_n[cols], f_next[cols]

        def interp(tau):
            return ((1.0 + 2.0 * tau) * (1.0 - tau) ** 2 * a
                    + (3.0 - 2.0 * tau) * tau**2 * bb
                    + h * tau * (1.0 - tau) ** 2 * fa
                    + h * (tau - 1.0) * tau**2 * fb)
        return interp
    return make


def _fast_subproblem(problem, fast, u_n, t_n, h, make_interp):
    """Restricted problem over the fast indices.

    The full-state buffer carries interpolated slow values at the needed
    columns (the structural closure of the fast rows) and the solver's
    fast iterate; RHS and Jacobian evaluation delegate to the parent
    problem's restricted entry points.
    """
    fast = np.asarray(fast, dtype=int)
    closure = set()
    for i in fast:
        closure.update(problem.dependency(int(i)))
    closure.difference_update(fast.tolist())
    cols = np.array(sorted(closure), dtype=int)
    interp = make_interp(cols) if len(cols) else None
    buf = u_n.copy()
    scratch = np.empty_like(buf)

    def fill(yf, t):
        if interp is not None:
            buf[cols] = interp((t - t_n) / h)
        buf[fast] = yf

    def rhs(yf, t, out):
        fill(yf, t)
        problem.rhs_restricted(buf, t, fast, scratch)
        out[:] = scratch[fast]

    jac = None
    if problem.jacobian_restricted is not None:
        def jac(yf, t):
            fill(yf, t)
            return problem.jacobian_restricted(buf, t, fast)

    pos = {int(j): k for k, j in enumerate(fast)}

    def dep(i):
        return tuple(pos[j] for j in problem.dependency(int(fast[i]))
                     if j in pos)

    return OdeProblem(N=len(fast), rhs=rhs, t_span=(t_n, t_n + h),
                      y0=u_n[fast], dependency=dep, jacobian=jac,
                      name=f"{problem.name}-fast")


class _OutputSampler:
    """Incremental dense-output evaluation on a fixed time grid.

    Each accepted global step is committed once with its interpolant and
    the fast sub-step interpolants gathered during that step, so nothing
    step-local has to be retained for the rest of the run.  Grid points
    in (t0, t0 + h] take the global interpolant; fast components are then
    overwritten from the covering fast sub-step interpolant.
    """

    def __init__(self, t_eval, n_state, t0, y0):
        self.t_eval = np.asarray(t_eval, dtype=float)
        self.y = np.empty((len(self.t_eval), n_state))
        # Points at or before the start of integration hold the initial
        # state; later commits never revisit them.
        i0 = int(np.searchsorted(self.t_eval, t0, side="right"))
        self.y[:i0] = y0
        self.filled = i0

    def commit_step(self, t0, h, interp, fast_subrecords=()):
        lo = int(np.searchsorted(self.t_eval, t0, side="right"))
        hi = int(np.searchsorted(self.t_eval, t0 + h, side="right"))
        lo = min(lo, self.filled)   # close round-off gaps at boundaries
        for i in range(lo, hi):
            tau = min(max((self.t_eval[i] - t0) / h, 0.0), 1.0)
            self.y[i] = interp(tau)
        for ft0, fh, finterp, fidx in fast_subrecords:
            flo = int(np.searchsorted(self.t_eval, ft0, side="right"))
            fhi = int(np.searchsorted(self.t_eval, ft0 + fh, side="right"))
            for i in range(max(flo, lo), min(fhi, hi)):
                ftau = min(max((self.t_eval[i] - ft0) / fh, 0.0), 1.0)
                self.y[i, fidx] = finterp(ftau)
        self.filled = max(self.filled, hi)

    def finish(self, y_final):
        # Grid points past the last committed step (round-off at the
        # horizon) hold the final state.
        self.y[self.filled:] = y_final
        return self.t_eval, self.y


def _initial_step(problem, cfg, method, stats):
    """Starting step size from the classical two-evaluation heuristic.

    A first guess h0 balances the weighted norms of the state and its
    derivative; an explicit Euler probe then estimates the derivative's
    rate of change, and the step is sized so the first error estimate
    lands near 0.01.  Costs two RHS evaluations, counted in ``stats``.
    """
    if cfg.h0 is not None:
        return cfg.h0
    t0, T = problem.t_span
    span = T - t0
    y0 = problem.y0
    sc = cfg.atol + cfg.rtol * np.abs(y0)
    f0 = np.empty_like(y0)
    problem.rhs(y0, t0, f0)
    f1 = np.empty_like(y0)
    stats.global_rhs_calls += 2
    d0 = float(np.sqrt(np.mean((y0 / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / sc) ** 2)))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6 * span
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    problem.rhs(y0 + h0 * f0, t0 + h0, f1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / sc) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6 * span, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (method.q + 1))
    return min(100.0 * h0, h1, span)


def integrate_single_rate(problem: OdeProblem, method: ButcherTableau,
                          config: SolverConfig) -> IntegrationResult:
    """Adaptive single-rate integration over the problem's time span."""
    cfg = config if config.mode == "single" else replace(config,
                                                         mode="single")
    t0, T = problem.t_span
    t, u = t0, problem.y0.copy()
    stats = StepStats()
    h = _initial_step(problem, cfg, method, stats)
    activity = []
    ts, ys = [t], [u.copy()]
    sampler = None
    if cfg.t_eval is not None:
        sampler = _OutputSampler(cfg.t_eval, problem.N, t0, u)
    cache = None
    nc = cfg.newton_config()
    if not method.is_explicit:
        cache = JacobianCache(problem, nc)
    guesser = _make_guesser(cfg)
    start = time.perf_counter()
    all_idx = np.arange(problem.N)
    while t < T - 1e-14 * max(1.0, abs(T)):
        if stats.accepted_global >= cfg.max_steps:
            raise IntegrationFailure("step budget exhausted", t, u, stats)
        h = min(h, T - t)
        if cache is not None:
            j0 = cache.evals
            cache.begin_global_step(u, t)
            stats.global_jacobians += cache.evals - j0
        try:
            u_next, eta, stages, _, work = _attempt_global_step(
                problem, u, t, h, method, cfg, cache, guesser)
        except (ConvergenceFailure, NumericalBlowup):
            stats.rejected_global_convergence += 1
            h *= 0.5
            if h < cfg.h_min:
                stats.wall_time = time.perf_counter() - start
                raise IntegrationFailure(
                    "step size below h_min after convergence failures",
                    t, u, stats)
            continue
        stats.global_rhs_calls += work.rhs_calls
        stats.global_jacobians += work.jacobian_evals
        eta_max = float(np.max(eta))
        if eta_max <= cfg.beta:
            stats.accepted_global += 1
            activity.append(ActivityRecord(
                step_index=stats.accepted_global, t_start=t, t_end=t + h,
                kind="global", active_indices=all_idx))
            if sampler is not None:
                w4 = WorkCounters()
                make = _make_interpolant(problem, method, cfg, u, u_next,
                                         t, h, stages, w4)
                stats.global_rhs_calls += w4.rhs_calls
                sampler.commit_step(t, h, make(all_idx))
            guesser.update(stages)
            t, u = t + h, u_next
            ts.append(t)
            ys.append(u.copy())
            h = new_step_size(h, eta_max, method.q, cfg.safety)
        else:
            stats.rejected_global_error += 1
            h = new_step_size(h, eta_max, method.q, cfg.safety)
            if h < cfg.h_min:
                stats.wall_time = time.perf_counter() - start
                raise IntegrationFailure("step size below h_min", t, u,
                                         stats)
    stats.wall_time = time.perf_counter() - start
    t_out = y_out = None
    if sampler is not None:
        t_out, y_out = sampler.finish(u)
    return IntegrationResult(t=np.array(ts), y=np.array(ys), stats=stats,
                             activity=activity, t_out=t_out, y_out=y_out,
                             method=method.name, mode="single")


def multirate_step(problem: OdeProblem, method: ButcherTableau,
                   config: SolverConfig, u_n: np.ndarray, t_n: float,
                   h_n: float, u_tentative: np.ndarray,
                   partition: Partition, eta_f: float, make_interp,
                   stats: StepStats, activity: list, step_index: int,
                   fast_records: list | None = None):
    """Re-integrate the fast components of one accepted global interval.

    The slow components of the returned state are taken bitwise from the
    tentative global step.  Fast components are advanced with adaptive
    sub-steps on [t_n, t_n + h_n]; their error measure is the maximum
    quotient over the fast set only.  Returns the combined state, or
    raises ConvergenceFailure when the sub-integration cannot proceed
    (the caller then rejects the global step).
    """
    fast = partition.fast
    sub = _fast_subproblem(problem, fast, u_n, t_n, h_n, make_interp)
    nc = config.newton_config()
    cache = None
    if not method.is_explicit:
        cache = JacobianCache(sub, nc)
    t_end = t_n + h_n
    t, yf = t_n, u_n[fast].copy()
    h_f = h_n * min(config.alpha_max,
                    max(config.alpha_min,
                        config.alpha * eta_f ** (-1.0 / (method.q + 1))
                        if eta_f > 0 else config.alpha_max))
    while t < t_end - 1e-14 * max(1.0, abs(t_end)):
        h_f = min(h_f, t_end - t)
        if cache is not None:
            j0 = cache.evals
            cache.begin_global_step(yf, t)
            stats.local_jacobians += cache.evals - j0
        try:
            y_next, y_hat, sub_stages, work = rk_step(sub, yf, t, h_f,
                                                      method, newton=nc,
                                                      cache=cache)
            if y_hat is None:
                # Step doubling for methods without an embedded pair.
                y_half, _, _, w2 = rk_step(sub, yf, t, 0.5 * h_f, method)
                y2, _, _, w3 = rk_step(sub, y_half, t + 0.5 * h_f,
                                       0.5 * h_f, method)
                work += w2
                work += w3
                y_hat, y_next = y_next, y2
        except (ConvergenceFailure, NumericalBlowup):
            stats.rejected_fast_convergence += 1
            h_f *= 0.5
            if h_f < config.h_min:
                raise ConvergenceFailure(
                    "fast sub-step below h_min") from None
            continue
        stats.local_rhs_calls += work.rhs_calls
        stats.local_jacobians += work.jacobian_evals
        eta_hat = float(np.max(error_quotients(y_next, y_hat, config.rtol,
                                               config.atol)))
        if eta_hat <= config.beta:
            stats.accepted_fast += 1
            activity.append(ActivityRecord(
                step_index=step_index, t_start=t, t_end=t + h_f,
                kind="fast", active_indices=fast))
            if fast_records is not None:
                w4 = WorkCounters()
                sub_make = _make_interpolant(sub, method, config, yf,
                                             y_next, t, h_f, sub_stages,
                                             w4)
                stats.local_rhs_calls += w4.rhs_calls
                fast_records.append(
                    (t, h_f, sub_make(np.arange(len(fast))), fast))
            t, yf = t + h_f, y_next
            h_f = new_step_size(h_f, eta_hat, method.q, config.safety)
        else:
            stats.rejected_fast_error += 1
            h_f = new_step_size(h_f, eta_hat, method.q, config.safety)
            if h_f < config.h_min:
                raise ConvergenceFailure("fast sub-step below h_min")
    u_next = u_tentative.copy()
    u_next[fast] = yf
    return u_next


def integrate_multirate(problem: OdeProblem, method: ButcherTableau,
                        config: SolverConfig) -> IntegrationResult:
    """Self-adjusting multi-rate integration over the problem's span."""
    cfg = config if config.mode == "multi" else replace(config, mode="multi")
    t0, T = problem.t_span
    t, u = t0, problem.y0.copy()
    stats = StepStats()
    h = _initial_step(problem, cfg, method, stats)
    activity = []
    ts, ys = [t], [u.copy()]
    sampler = None
    if cfg.t_eval is not None:
        sampler = _OutputSampler(cfg.t_eval, problem.N, t0, u)
    cache = None
    nc = cfg.newton_config()
    if not method.is_explicit:
        cache = JacobianCache(problem, nc)
    guesser = _make_guesser(cfg)
    start = time.perf_counter()
    all_idx = np.arange(problem.N)
    while t < T - 1e-14 * max(1.0, abs(T)):
        if stats.accepted_global >= cfg.max_steps:
            raise IntegrationFailure("step budget exhausted", t, u, stats)
        h = min(h, T - t)
        if cache is not None:
            j0 = cache.evals
            cache.begin_global_step(u, t)
            stats.global_jacobians += cache.evals - j0
        try:
            u_tent, eta, stages, _, work = _attempt_global_step(
                problem, u, t, h, method, cfg, cache, guesser)
        except (ConvergenceFailure, NumericalBlowup):
            stats.rejected_global_convergence += 1
            h *= 0.5
            if h < cfg.h_min:
                stats.wall_time = time.perf_counter() - start
                raise IntegrationFailure(
                    "step size below h_min after convergence failures",
                    t, u, stats)
            continue
        stats.global_rhs_calls += work.rhs_calls
        stats.global_jacobians += work.jacobian_evals
        decision, part, eta_s, eta_f = select_partition(eta, cfg.phi,
                                                        cfg.beta)
        if decision == "reject":
            stats.rejected_global_error += 1
            h = new_step_size(h, eta_s, method.q, cfg.safety)
            if h < cfg.h_min:
                stats.wall_time = time.perf_counter() - start
                raise IntegrationFailure("step size below h_min", t, u,
                                         stats)
            continue
        make_interp = None
        if decision == "go_multirate" or cfg.t_eval is not None:
            w4 = WorkCounters()
            make_interp = _make_interpolant(problem, method, cfg, u,
                                            u_tent, t, h, stages, w4)
            stats.global_rhs_calls += w4.rhs_calls
        step_records = [] if sampler is not None else None
        if decision == "accept":
            u_next = u_tent
        else:
            step_index = stats.accepted_global + 1
            n_act = len(activity)
            try:
                u_next = multirate_step(
                    problem, method, cfg, u, t, h, u_tent, part, eta_f,
                    make_interp, stats, activity, step_index,
                    fast_records=step_records)
            except ConvergenceFailure:
                # Roll back the partial fast phase of the rejected step.
                del activity[n_act:]
                stats.rejected_global_convergence += 1
                h *= 0.5
                if h < cfg.h_min:
                    stats.wall_time = time.perf_counter() - start
                    raise IntegrationFailure(
                        "step size below h_min after fast-phase failure",
                        t, u, stats)
                continue
        stats.accepted_global += 1
        activity.append(ActivityRecord(
            step_index=stats.accepted_global, t_start=t, t_end=t + h,
            kind="global", active_indices=all_idx))
        if sampler is not None:
            sampler.commit_step(t, h, make_interp(all_idx), step_records)
        guesser.update(stages)
        t, u = t + h, u_next
        ts.append(t)
        ys.append(u.copy())
        h = new_step_size(h, eta_s, method.q, cfg.safety)
    stats.wall_time = time.perf_counter() - start
    t_out = y_out = None
    if sampler is not None:
        t_out, y_out = sampler.finish(u)
    return IntegrationResult(t=np.array(ts), y=np.array(ys), stats=stats,
                             activity=activity, t_out=t_out, y_out=y_out,
                             method=method.name, mode="multi")


def integrate(problem: OdeProblem, method: ButcherTableau,
              config: SolverConfig) -> IntegrationResult:
    """Dispatch on config.mode."""
    if config.mode == "multi":
        return integrate_multirate(problem, method, config)
    return integrate_single_rate(problem, method, config)
