"""Interpolation of slow variables inside one global step.

Two dual representations are provided.  The data form consumes the
vectors produced by an actual step (endpoint states, endpoint derivatives,
or retained stages) and is what the adaptive controller uses.  The
operator form produces the matrix Q(tau) acting on u_n for the linear
problem y' = Ly, which is the building block of the multi-rate
amplification matrix.  On linear problems the two forms agree to round-off
by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _linops
from .tableaux import ButcherTableau

KINDS = ("linear", "hermite", "dense")


@dataclass(frozen=True)
class InterpolatorKind:
    """Selected interpolation scheme for slow variables.

    ``linear`` needs the two endpoint states; ``hermite`` additionally
    needs the endpoint derivatives; ``dense`` needs the stage derivative
    vectors retained from the step, plus the method's continuous-output
    coefficients.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(
                f"unknown interpolation kind {self.kind!r}; "
                f"expected one of {KINDS}")


LINEAR = InterpolatorKind("linear")
HERMITE = InterpolatorKind("hermite")
DENSE = InterpolatorKind("dense")


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0.0) or np.any(tau > 1.0):
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    return tau


def interp_value(kind: InterpolatorKind, u_n, u_next, f_n=None, f_next=None,
                 stages=None, h: float | None = None, tau=0.0):
    """Interpolated state at t_n + tau*h from one step's data.

    ``stages`` is the StageSet of the step (required for ``dense``);
    ``f_n``/``f_next`` are the endpoint derivatives (required for
    ``hermite``).  ``tau`` may be a scalar or an array; an array yields one
    row per tau value.
    """
    tau = _check_tau(tau)
    u_n = np.asarray(u_n, dtype=float)
    u_next = np.asarray(u_next, dtype=float)
    if kind.kind == "linear":
        t = tau[..., None] if tau.ndim else tau
        return (1.0 - t) * u_n + t * u_next
    if kind.kind == "hermite":
        if f_n is None or f_next is None:
            raise ValueError("hermite interpolation requires endpoint "
                             "derivatives f_n and f_next")
        if h is None:
            raise ValueError("hermite interpolation requires the step size")
        f_n = np.asarray(f_n, dtype=float)
        f_next = np.asarray(f_next, dtype=float)
        t = tau[..., None] if tau.ndim else tau
        return ((1.0 + 2.0 * t) * (1.0 - t) ** 2 * u_n
                + (3.0 - 2.0 * t) * t**2 * u_next
                + h * t * (1.0 - t) ** 2 * f_n
                + h * (t - 1.0) * t**2 * f_next)
    # dense
    if stages is None:
        raise ValueError("dense interpolation requires the retained stages")
    return stages.dense_eval(tau)


def interp_operator(kind: InterpolatorKind, L: np.ndarray, h: float,
                    method: ButcherTableau, tau: float) -> np.ndarray:
    """Matrix Q(tau) with Q(tau) u_n = interp_value(...) on y' = Ly.

    Endpoint identities: Q(0) = I for every kind, and Q(1) = R(hL) for the
    linear and hermite kinds (and for dense when the method's continuous
    output is endpoint-consistent).
    """
    tau = float(_check_tau(tau))
    L = np.asarray(L, dtype=float)
    out = _linops.interp_matrices(
        kind.kind, L[None], np.array([h], dtype=float), method,
        np.array([tau]))
    return out[0, 0]
