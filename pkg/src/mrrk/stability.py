"""Linear stability analysis of single- and multi-rate Runge-Kutta steps.

For the linear test problem y' = Ly one global step of either scheme is a
matrix acting on the state.  This module builds those matrices, scans their
spectral radius over the normalized step size C = h_s * Lambda (Lambda the
largest eigenvalue modulus of L), and compares propagators against the
exact evolution matrix exp(Lt).

Two canonical model problems are provided: a two-variable system with one
fast variable whose time-scale separation is controlled by a ratio alpha
and a coupling kappa, and a four-variable two-mass oscillator chain with
two fast variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _linops
from .interp import InterpolatorKind
from .tableaux import ButcherTableau


@dataclass(frozen=True)
class PartitionedLinearModel:
    """Linear model y' = Ly with the last ``d`` components labelled fast.

    ``Lam`` is the largest eigenvalue modulus of L and converts between the
    step size h_s and the normalized step C = h_s * Lam.  ``label`` and
    ``params`` carry presentation metadata for scan output.
    """

    L: np.ndarray
    d: int
    label: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("L must be a square matrix")
        if not (0 < self.d <= L.shape[0]):
            raise ValueError("fast dimension d must be in [1, N]")
        object.__setattr__(self, "L", L)

    @property
    def N(self) -> int:
        return self.L.shape[0]

    @property
    def n_slow(self) -> int:
        return self.N - self.d

    @property
    def L_ss(self) -> np.ndarray:
        return self.L[:self.n_slow, :self.n_slow]

    @property
    def L_sf(self) -> np.ndarray:
        return self.L[:self.n_slow, self.n_slow:]

    @property
    def L_fs(self) -> np.ndarray:
        return self.L[self.n_slow:, :self.n_slow]

    @property
    def L_ff(self) -> np.ndarray:
        return self.L[self.n_slow:, self.n_slow:]

    @property
    def Lam(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.L))))


@dataclass(frozen=True)
class MultirateAmplification:
    """One multi-rate step on y' = Ly as a matrix, with its ingredients.

    ``R_mr`` maps u_n to u_{n+1}.  ``C_ff`` is the fast-block single-rate
    matrix at the sub-step size h_f = h_s / M; the bottom rows of R_mr are
    C_ff^M on the fast block plus the accumulated slow-coupling term.
    """

    R_mr: np.ndarray
    C_ff: np.ndarray
    h_s: float
    M: int
    method: str
    interp: str


def model_2dof(alpha: float, kappa: float) -> PartitionedLinearModel:
    """Two-variable model with one fast variable.

    L = [[-1, 1], [-kappa*alpha, -alpha]]; alpha is the fast/slow
    time-scale ratio and kappa the coupling strength.  Both eigenvalues
    have negative real part for kappa < 1.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if kappa >= 1:
        raise ValueError("kappa must be < 1 for a stable model")
    L = np.array([[-1.0, 1.0], [-kappa * alpha, -alpha]])
    return PartitionedLinearModel(
        L, d=1, label="2dof", params={"alpha": alpha, "kappa": kappa})


def model_4dof(omega1: float, gamma1: float, alpha_ratio: float,
               beta_ratio: float, kappa: float) -> PartitionedLinearModel:
    """Two coupled point masses: slow pair (y1, y2), fast pair (y3, y4).

    omega1 is the slow natural frequency, gamma1 the slow damping,
    alpha_ratio the fast/slow frequency ratio, beta_ratio the damping
    ratio, and kappa the spring-coupling strength.
    """
    if omega1 <= 0:
        raise ValueError("omega1 must be positive")
    if gamma1 < 0:
        raise ValueError("gamma1 must be nonnegative")
    if alpha_ratio <= 0 or beta_ratio <= 0:
        raise ValueError("alpha_ratio and beta_ratio must be positive")
    if not 0 <= kappa <= 1:
        raise ValueError("kappa must lie in [0, 1]")
    a2 = alpha_ratio**2
    w2 = omega1**2
    L = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-w2 * (1.0 + a2 * kappa), -gamma1, kappa * a2 * w2, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [a2 * w2, 0.0, -a2 * w2, -beta_ratio * gamma1],
    ])
    return PartitionedLinearModel(
        L, d=2, label="4dof",
        params={"omega1": omega1, "gamma1": gamma1, "alpha": alpha_ratio,
                "beta": beta_ratio, "kappa": kappa})


def single_rate_R(L: np.ndarray, h: float,
                  method: ButcherTableau) -> np.ndarray:
    """Single-rate step matrix R(hL) = I + h sum_i b_i L R^(i)."""
    L = np.asarray(L, dtype=float)
    return _linops.rk_matrix(L[None], np.array([float(h)]), method)[0]


def multirate_R(model: PartitionedLinearModel, h_s: float, M: int,
                method: ButcherTableau,
                interp: InterpolatorKind) -> MultirateAmplification:
    """Amplification matrix of one multi-rate step on the model.

    The slow components take one step of size h_s; the fast components
    take M equal sub-steps of size h_s / M with the slow values
    interpolated by the selected scheme.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    h = np.array([float(h_s)])
    R = _linops.multirate_matrix(
        model.L[None], model.d, h, M, method, interp.kind)[0]
    C_ff = _linops.rk_matrix(
        model.L_ff[None], h / M, method)[0]
    return MultirateAmplification(R_mr=R, C_ff=C_ff, h_s=float(h_s), M=M,
                                  method=method.name, interp=interp.kind)


def spectral_radius(A: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def rho_curve(model: PartitionedLinearModel, method: ButcherTableau,
              interp: InterpolatorKind, M: int,
              C_grid: np.ndarray) -> np.ndarray:
    """Spectral radius of the multi-rate step at each normalized step C.

    The whole grid is pushed through the matrix assembly as one batch, so
    scans over many C values cost a handful of vectorized linear solves.
    """
    C_grid = np.asarray(C_grid, dtype=float)
    h = C_grid / model.Lam
    Lb = np.broadcast_to(model.L, (len(C_grid),) + model.L.shape)
    R = _linops.multirate_matrix(Lb, model.d, h, M, method, interp.kind)
    return _linops.spectral_radii(R)


def max_stable_C(model: PartitionedLinearModel, method: ButcherTableau,
                 interp: InterpolatorKind, M: int,
                 C_grid: np.ndarray | None = None,
                 rho_tol: float = 1e-8):
    """Largest grid C with rho(R_mr) <= 1 + rho_tol.

    Returns the sentinel string ">= {Cmax}" when every grid point is
    stable, and None when none is.  The stability region need not be an
    interval; use `rho_curve` to inspect gaps.
    """
    if C_grid is None:
        C_grid = np.arange(1.0, 101.0)
    C_grid = np.asarray(C_grid, dtype=float)
    if len(C_grid) == 0:
        raise ValueError("C_grid must be nonempty")
    rho = rho_curve(model, method, interp, M, C_grid)
    stable = rho <= 1.0 + rho_tol
    if np.all(stable):
        cmax = C_grid[-1]
        return f">= {cmax:g}"
    if not np.any(stable):
        return None
    return float(C_grid[np.max(np.nonzero(stable)[0])])


def stability_boundary(model: PartitionedLinearModel, method: ButcherTableau,
                       interp: InterpolatorKind, M: int,
                       C_max: float = 100.0, rho_tol: float = 1e-8,
                       refine_tol: float = 1e-6) -> float | None:
    """First C at which the multi-rate step loses stability.

    Scans integer C values up to C_max, then refines the first unstable
    bracket by multisection down to ``refine_tol``.  Returns None when no
    integer grid point up to C_max is unstable.
    """
    C_grid = np.arange(1.0, np.floor(C_max) + 1.0)
    rho = rho_curve(model, method, interp, M, C_grid)
    unstable = np.nonzero(rho > 1.0 + rho_tol)[0]
    if len(unstable) == 0:
        return None
    i = unstable[0]
    lo = C_grid[i] - 1.0 if i > 0 else 0.0
    hi = C_grid[i]
    # Multisection: 14 interior probes per round shrink the bracket 15x,
    # so five rounds reach 1e-6 resolution on a unit-wide bracket.
    while hi - lo > refine_tol:
        probes = np.linspace(lo, hi, 16)[1:-1]
        r = rho_curve(model, method, interp, M, probes)
        bad = np.nonzero(r > 1.0 + rho_tol)[0]
        if len(bad) == 0:
            lo = probes[-1]
        else:
            j = bad[0]
            hi = probes[j]
            if j > 0:
                lo = probes[j - 1]
    return 0.5 * (lo + hi)


def table_entry(model: PartitionedLinearModel, method: ButcherTableau,
                interp: InterpolatorKind, M: int, C_max: float = 100.0,
                rho_tol: float = 1e-8):
    """Integer max-C table entry: ceiling of the first stability boundary.

    The published tables round the first loss-of-stability boundary up to
    the next integer (boundaries that sit on an integer within 1e-6 are
    kept as that integer).  Returns the sentinel ">= {C_max}" when the
    scheme stays stable on the whole integer grid.
    """
    boundary = stability_boundary(model, method, interp, M,
                                  C_max=C_max, rho_tol=rho_tol)
    if boundary is None:
        return f">= {C_max:g}"
    snapped = round(boundary)
    if abs(boundary - snapped) < 1e-6:
        boundary = snapped
    return int(np.ceil(boundary))


def matrix_exponential(L: np.ndarray, t: float) -> np.ndarray:
    """exp(Lt) via scaling-and-squaring with a Pade core."""
    L = np.asarray(L, dtype=float)
    if not np.all(np.isfinite(L)):
        raise ValueError("matrix has non-finite entries")
    return expm(L * float(t))


def propagator_error(model: PartitionedLinearModel, method: ButcherTableau,
                     interp: InterpolatorKind, mode: str, M: int,
                     C: float, t_final: float) -> float:
    """Relative operator-norm error of the n-step propagator vs exp(Lt).

    ``mode`` selects the single-rate matrix R(h_s L) or the multi-rate
    matrix; n = t_final / h_s must be an integer number of global steps.
    """
    if mode not in ("single", "multi"):
        raise ValueError(f"mode must be 'single' or 'multi', got {mode!r}")
    h_s = C / model.Lam
    n_real = t_final / h_s
    n = round(n_real)
    if abs(n_real - n) > 1e-9 * max(1.0, abs(n_real)) or n < 1:
        raise ValueError(
            f"t_final / h_s = {n_real} is not a positive integer")
    if mode == "single":
        A = single_rate_R(model.L, h_s, method)
    else:
        A = multirate_R(model, h_s, M, method, interp).R_mr
    exact = matrix_exponential(model.L, t_final)
    err = np.linalg.matrix_power(A, n) - exact
    return float(np.linalg.norm(err, 2) / np.linalg.norm(exact, 2))


def scan_records(model: PartitionedLinearModel, method: ButcherTableau,
                 interp: InterpolatorKind, M_values, C_grid=None,
                 rho_tol: float = 1e-8):
    """Rows {model, method, interp, params..., M, C, rho, stable} for CSV.

    Model parameters that a model kind does not define are emitted as
    empty strings so all rows share one header.
    """
    if C_grid is None:
        C_grid = np.arange(1.0, 101.0)
    C_grid = np.asarray(C_grid, dtype=float)
    p = model.params
    base = {
        "model": model.label,
        "method": method.name,
        "interp": interp.kind,
        "gamma1": p.get("gamma1", ""),
        "omega1": p.get("omega1", ""),
        "alpha": p.get("alpha", ""),
        "beta": p.get("beta", ""),
        "kappa": p.get("kappa", ""),
    }
    rows = []
    for M in M_values:
        rho = rho_curve(model, method, interp, int(M), C_grid)
        for C, r in zip(C_grid, rho):
            rows.append(dict(base, M=int(M), C=float(C), rho=float(r),
                             stable=bool(r <= 1.0 + rho_tol)))
    return rows
