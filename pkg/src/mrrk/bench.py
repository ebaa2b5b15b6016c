"""Benchmark problems: inverter chain, viscous Burgers, building heating.

Each factory returns an `OdeProblem` with vectorized RHS, restricted RHS
over an index subset, analytic Jacobians (sparse where the structure is
banded), and per-component dependency sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .odecore import OdeProblem

# ---------------------------------------------------------------------------
# Inverter chain


@dataclass(frozen=True)
class InverterChainParams:
    """Chain of N inverters driven by a piecewise-linear input pulse."""

    N: int = 1000
    U_op: float = 5.0
    U_tau: float = 1.0
    Gamma: float = 500.0
    # Input breakpoints (t, value); zero after the last breakpoint.
    breakpoints: tuple = ((0.0, 0.0), (5.0, 0.0), (10.0, 5.0),
                          (15.0, 5.0), (20.0, 0.0))
    t_span: tuple = (0.0, 200.0)

    def __post_init__(self):
        if not self.U_op > self.U_tau > 0:
            raise ValueError("require U_op > U_tau > 0")
        if self.Gamma <= 0:
            raise ValueError("Gamma must be positive")


def inverter_g(y, z, U_tau):
    """Conductance term max(y - U_tau, 0)^2 - max(y - z - U_tau, 0)^2."""
    a = np.maximum(y - U_tau, 0.0)
    b = np.maximum(y - z - U_tau, 0.0)
    return a * a - b * b


def inverter_input(params: InverterChainParams, t):
    """Piecewise-linear input voltage of the first inverter."""
    pts = np.asarray(params.breakpoints)
    return np.interp(t, pts[:, 0], pts[:, 1], left=0.0, right=0.0)


def inverter_equilibrium(params: InverterChainParams) -> np.ndarray:
    """Alternating rest state of the chain for zero input.

    Solved link by link with a damped fixed-point iteration on
    y = U_op - Gamma g(y_prev, y); the published rounded values are close
    to but not exactly on this equilibrium.
    """
    y = np.empty(params.N)
    prev = 0.0
    for j in range(params.N):
        val = 0.0
        for _ in range(200):
            res = (params.U_op - val
                   - params.Gamma * inverter_g(prev, val, params.U_tau))
            # Damping by the local stiffness keeps the iteration stable
            # on the high-gain links.
            gain = 1.0 + 2.0 * params.Gamma * max(
                prev - val - params.U_tau, 0.0)
            val += res / gain
            if abs(res) < 1e-14:
                break
        y[j] = val
        prev = val
    return y


def make_inverter_chain(
        params: InverterChainParams | None = None) -> OdeProblem:
    if params is None:
        params = InverterChainParams()
    p = params
    if p.N < 2:
        raise ValueError("chain needs at least 2 inverters")
    N, U_op, U_tau, G = p.N, p.U_op, p.U_tau, p.Gamma

    def rhs(y, t, out):
        u = inverter_input(p, t)
        out[0] = U_op - y[0] - G * inverter_g(u, y[0], U_tau)
        out[1:] = U_op - y[1:] - G * inverter_g(y[:-1], y[1:], U_tau)

    def rhs_restricted(y, t, indices, out):
        idx = np.asarray(indices)
        first = idx == 0
        if np.any(first):
            u = inverter_input(p, t)
            out[0] = U_op - y[0] - G * inverter_g(u, y[0], U_tau)
        rest = idx[idx > 0]
        if len(rest):
            out[rest] = (U_op - y[rest]
                         - G * inverter_g(y[rest - 1], y[rest], U_tau))

    def _dg(yprev, ycur):
        # Partial derivatives of g(y_prev, y_cur).
        a = np.maximum(yprev - U_tau, 0.0)
        b = np.maximum(yprev - ycur - U_tau, 0.0)
        return 2.0 * a - 2.0 * b, 2.0 * b      # d/dy_prev, d/dy_cur

    def jacobian(y, t):
        u = inverter_input(p, t)
        diag = np.empty(N)
        sub = np.empty(N - 1)
        _, gz0 = _dg(np.array([u]), y[:1])
        diag[0] = -1.0 - G * gz0[0]
        gy, gz = _dg(y[:-1], y[1:])
        diag[1:] = -1.0 - G * gz
        sub[:] = -G * gy
        return sp.diags([diag, sub], [0, -1], format="csr")

    def jacobian_restricted(y, t, indices):
        idx = np.asarray(indices)
        k = len(idx)
        J = np.zeros((k, k))
        pos = {int(j): r for r, j in enumerate(idx)}
        u = inverter_input(p, t)
        for r, j in enumerate(idx):
            if j == 0:
                _, gz = _dg(np.array([u]), y[:1])
                J[r, r] = -1.0 - G * gz[0]
            else:
                gy, gz = _dg(y[j - 1:j], y[j:j + 1])
                J[r, r] = -1.0 - G * gz[0]
                if j - 1 in pos:
                    J[r, pos[j - 1]] = -G * gy[0]
        return J

    def dependency(i):
        return (0,) if i == 0 else (i - 1, i)

    y0 = np.where(np.arange(1, N + 1) % 2 == 0, 6.247e-3, 1.0)
    return OdeProblem(N=N, rhs=rhs, rhs_restricted=rhs_restricted,
                      jacobian=jacobian,
                      jacobian_restricted=jacobian_restricted,
                      dependency=dependency, t_span=p.t_span, y0=y0,
                      name="inverter")


# ---------------------------------------------------------------------------
# Viscous Burgers equation


@dataclass(frozen=True)
class BurgersParams:
    """Centered finite differences on [0, L_dom] with frozen boundaries."""

    N: int = 1000
    nu: float = 1e-2
    L_dom: float = 25.0
    t_span: tuple = (0.0, 5.0)

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("viscosity must be nonnegative")
        if self.N < 3:
            raise ValueError("need at least 3 grid nodes")


def burgers_initial(params: BurgersParams) -> np.ndarray:
    x = np.linspace(0.0, params.L_dom, params.N)
    w = params.L_dom / 50.0
    return np.exp(-((x - params.L_dom / 2.0) / w) ** 2)


def make_burgers(params: BurgersParams | None = None) -> OdeProblem:
    if params is None:
        params = BurgersParams()
    p = params
    N, nu = p.N, p.nu
    dx = p.L_dom / (N - 1)
    c1 = 1.0 / (2.0 * dx)
    c2 = nu / dx**2

    def rhs(y, t, out):
        out[0] = 0.0
        out[-1] = 0.0
        out[1:-1] = (-y[1:-1] * (y[2:] - y[:-2]) * c1
                     + c2 * (y[2:] - 2.0 * y[1:-1] + y[:-2]))

    def rhs_restricted(y, t, indices, out):
        idx = np.asarray(indices)
        inner = idx[(idx > 0) & (idx < N - 1)]
        out[idx] = 0.0
        if len(inner):
            out[inner] = (-y[inner] * (y[inner + 1] - y[inner - 1]) * c1
                          + c2 * (y[inner + 1] - 2.0 * y[inner]
                                  + y[inner - 1]))

    def jacobian(y, t):
        lo = np.zeros(N - 1)
        di = np.zeros(N)
        up = np.zeros(N - 1)
        di[1:-1] = -(y[2:] - y[:-2]) * c1 - 2.0 * c2
        lo[:-1] = y[1:-1] * c1 + c2
        up[1:] = -y[1:-1] * c1 + c2
        return sp.diags([lo, di, up], [-1, 0, 1], format="csr")

    def jacobian_restricted(y, t, indices):
        idx = np.asarray(indices)
        k = len(idx)
        J = np.zeros((k, k))
        pos = {int(j): r for r, j in enumerate(idx)}
        for r, j in enumerate(idx):
            if j == 0 or j == N - 1:
                continue
            J[r, r] = -(y[j + 1] - y[j - 1]) * c1 - 2.0 * c2
            if j - 1 in pos:
                J[r, pos[j - 1]] = y[j] * c1 + c2
            if j + 1 in pos:
                J[r, pos[j + 1]] = -y[j] * c1 + c2
        return J

    def dependency(i):
        if i == 0 or i == N - 1:
            return (i,)
        return (i - 1, i, i + 1)

    return OdeProblem(N=N, rhs=rhs, rhs_restricted=rhs_restricted,
                      jacobian=jacobian,
                      jacobian_restricted=jacobian_restricted,
                      dependency=dependency, t_span=p.t_span,
                      y0=burgers_initial(p), name="burgers")


# ---------------------------------------------------------------------------
# Building heating system


def smooth_step(t, t_s, dt):
    """0-to-1 transition centered at t_s with width dt."""
    return 0.5 * (np.tanh((t - t_s) / dt) + 1.0)


def smooth_sat(x, x_min, x_max):
    """Smooth saturation onto (x_min, x_max); note sat(x_min) > x_min."""
    mid = 0.5 * (x_max + x_min)
    half = 0.5 * (x_max - x_min)
    return mid + half * np.tanh(2.0 * (x - x_min) / (x_max - x_min) - 1.0)


def _smooth_sat_deriv(x, x_min, x_max):
    th = np.tanh(2.0 * (x - x_min) / (x_max - x_min) - 1.0)
    return 1.0 - th * th


@dataclass(frozen=True)
class HeatingParams:
    """Central heating supply serving N independently controlled units."""

    N: int = 100
    K_ps: float = 0.2
    T_h: float = 293.15
    T_l: float = 288.15
    T_s0: float = 343.15
    G_hn: float = 200.0
    G_u: float = 150.0
    t_h: float = 20.0
    K_pu: float = 1.0
    rng_seed: int = 42
    t_span: tuple = (0.0, 172800.0)
    step_width: float = 1.0          # seconds; set-point transition width

    @property
    def Q_max(self) -> float:
        return 0.7 * self.N * self.G_hn * (self.T_s0 - self.T_h)

    @property
    def C_s(self) -> float:
        return 2e6 * self.N

    def C_u(self) -> np.ndarray:
        j = np.arange(1, self.N + 1)
        return (1.0 + 0.348 * j / self.N) * 1e7


def heating_schedule(params: HeatingParams):
    """Per-unit set-point switch times (seconds past midnight).

    Up-switches are drawn uniformly in 6:00-12:00 and down-switches in
    15:00-22:00 from a seeded generator, so runs are reproducible.
    """
    rng = np.random.default_rng(params.rng_seed)
    t_up = rng.uniform(6.0, 12.0, params.N) * 3600.0
    t_down = rng.uniform(15.0, 22.0, params.N) * 3600.0
    return t_up, t_down


def external_temperature(t):
    """Daily sinusoidal ambient temperature, peak at 14:00."""
    return 278.15 + 8.0 * np.cos(2.0 * np.pi * (t - 14.0 * 3600.0) / 86400.0)


def make_heating(params: HeatingParams | None = None) -> OdeProblem:
    if params is None:
        params = HeatingParams()
    p = params
    N = p.N
    n_state = 2 * N + 2
    Q_max, C_s, C_u = p.Q_max, p.C_s, p.C_u()
    t_up, t_down = heating_schedule(p)
    iG = np.arange(1, N + 1)          # G_h block
    iT = np.arange(N + 1, 2 * N + 1)  # T_u block
    iE = 2 * N + 1

    def setpoints(t):
        tm = np.mod(t, 86400.0)
        s = (smooth_step(tm, t_up, p.step_width)
             - smooth_step(tm, t_down, p.step_width))
        return p.T_l + (p.T_h - p.T_l) * s

    def rhs(y, t, out):
        T_s = y[0]
        G_h = y[iG]
        T_u = y[iT]
        T_e = external_temperature(t)
        Q_s = smooth_sat(p.K_ps * Q_max * (p.T_s0 - T_s), 0.0, Q_max)
        Q_h = G_h * (T_s - T_u)
        u = smooth_sat(p.K_pu * (setpoints(t) - T_u), 0.0, 1.0)
        out[0] = (Q_s - np.sum(Q_h)) / C_s
        out[iG] = (u * p.G_hn - G_h) / p.t_h
        out[iT] = (Q_h - p.G_u * (T_u - T_e)) / C_u
        out[iE] = Q_s

    def rhs_restricted(y, t, indices, out):
        idx = np.asarray(indices)
        T_s = y[0]
        T_e = external_temperature(t)
        need_qs = np.any(idx == 0) or np.any(idx == iE)
        if need_qs:
            Q_s = smooth_sat(p.K_ps * Q_max * (p.T_s0 - T_s), 0.0, Q_max)
        if np.any(idx == 0):
            out[0] = (Q_s - np.sum(y[iG] * (T_s - y[iT]))) / C_s
        g = idx[(idx >= 1) & (idx <= N)]
        if len(g):
            j = g - 1
            tm = np.mod(t, 86400.0)
            s = (smooth_step(tm, t_up[j], p.step_width)
                 - smooth_step(tm, t_down[j], p.step_width))
            sp_j = p.T_l + (p.T_h - p.T_l) * s
            u = smooth_sat(p.K_pu * (sp_j - y[N + 1 + j]), 0.0, 1.0)
            out[g] = (u * p.G_hn - y[g]) / p.t_h
        tt = idx[(idx >= N + 1) & (idx <= 2 * N)]
        if len(tt):
            j = tt - (N + 1)
            Q_h = y[1 + j] * (T_s - y[tt])
            out[tt] = (Q_h - p.G_u * (y[tt] - T_e)) / C_u[j]
        if np.any(idx == iE):
            out[iE] = Q_s

    def jacobian(y, t):
        T_s = y[0]
        G_h = y[iG]
        T_u = y[iT]
        J = np.zeros((n_state, n_state))
        x = p.K_ps * Q_max * (p.T_s0 - T_s)
        dQs = _smooth_sat_deriv(x, 0.0, Q_max) * (-p.K_ps * Q_max)
        J[0, 0] = (dQs - np.sum(G_h)) / C_s
        J[0, iG] = -(T_s - T_u) / C_s
        J[0, iT] = G_h / C_s
        xu = p.K_pu * (setpoints(t) - T_u)
        du = _smooth_sat_deriv(xu, 0.0, 1.0) * (-p.K_pu)
        J[iG, iG] = -1.0 / p.t_h
        J[iG, iT] = p.G_hn * du / p.t_h
        J[iT, 0] = G_h / C_u
        J[iT, iG] = (T_s - T_u) / C_u
        J[iT, iT] = (-G_h - p.G_u) / C_u
        J[iE, 0] = dQs
        return J

    def jacobian_restricted(y, t, indices):
        idx = np.asarray(indices)
        return jacobian(y, t)[np.ix_(idx, idx)]

    def dependency(i):
        if i == 0:
            return (0,) + tuple(range(1, 2 * N + 1))
        if 1 <= i <= N:
            return (i, N + i)
        if N + 1 <= i <= 2 * N:
            return (0, i - N, i)
        return (0,)

    y0 = np.empty(n_state)
    y0[0] = p.T_s0
    y0[iG] = 0.0
    y0[iT] = 288.15
    y0[iE] = 0.0
    return OdeProblem(N=n_state, rhs=rhs, rhs_restricted=rhs_restricted,
                      jacobian=jacobian,
                      jacobian_restricted=jacobian_restricted,
                      dependency=dependency, t_span=p.t_span, y0=y0,
                      name="heating")
