"""Batched linear-algebra kernels for stability analysis.

All kernels act on stacks of matrices: ``L`` has shape (B, n, n) and the
step size ``h`` has shape (B,).  Broadcasting a whole grid of step sizes
through one call keeps parameter scans fast without any explicit
parallelism.  The public modules (`interp`, `stability`) wrap these kernels
with single-matrix signatures.
"""

from __future__ import annotations

import numpy as np

from .tableaux import ButcherTableau


def _eye_like(L):
    n = L.shape[-1]
    return np.broadcast_to(np.eye(n), L.shape)


def stage_operators(L: np.ndarray, h: np.ndarray, tab: ButcherTableau):
    """Stage propagation operators R^(i) for the linear problem y' = Ly.

    Solves, stage by stage,

        R^(k) = (I - h a_kk L)^{-1} (I + h sum_{j<k} a_kj L R^(j)),

    with a_kk = 0 handled without a linear solve (explicit stages and the
    first stage of an ESDIRK method).  Returns a pair (R, LR) of lists of
    (B, n, n) arrays, where LR[i] = L @ R[i] is cached because every
    downstream formula consumes the product rather than R itself.

    Raises ``np.linalg.LinAlgError`` with the stage index when a stage
    factor is singular.
    """
    A = tab.A
    hh = h[:, None, None]
    I = _eye_like(L)
    R: list[np.ndarray] = []
    LR: list[np.ndarray] = []
    for k in range(tab.s):
        acc = I.copy()
        for j in range(k):
            if A[k, j] != 0.0:
                acc = acc + (hh * A[k, j]) * LR[j]
        akk = A[k, k]
        if akk != 0.0:
            try:
                acc = np.linalg.solve(I - (hh * akk) * L, acc)
            except np.linalg.LinAlgError as exc:
                raise np.linalg.LinAlgError(
                    f"singular stage factor at stage {k + 1}"
                ) from exc
        R.append(acc)
        LR.append(L @ acc)
    return R, LR


def rk_matrix(L: np.ndarray, h: np.ndarray, tab: ButcherTableau,
              lr: list[np.ndarray] | None = None) -> np.ndarray:
    """Single-step propagation matrix R(hL) = I + h sum_i b_i L R^(i)."""
    if lr is None:
        _, lr = stage_operators(L, h, tab)
    hh = h[:, None, None]
    out = _eye_like(L).copy()
    for bi, LRi in zip(tab.b, lr):
        if bi != 0.0:
            out = out + (hh * bi) * LRi
    return out


def interp_matrices(kind: str, L: np.ndarray, h: np.ndarray,
                    tab: ButcherTableau, taus: np.ndarray) -> np.ndarray:
    """Interpolation operators Q(tau) for a stack of tau values.

    Returns shape (T, B, n, n) where T = len(taus).  Kinds:

    * ``linear``:  Q(tau) = (1 - tau) I + tau R(hL)
    * ``hermite``: cubic Hermite in the step endpoints and their
      derivatives, Q(tau) = (1+2tau)(1-tau)^2 I + (3-2tau) tau^2 R
      + h tau (1-tau)^2 L + h (tau-1) tau^2 L R
    * ``dense``:   the method's continuous output,
      Q(tau) = I + h sum_i b*_i(tau) L R^(i)
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    hh = h[:, None, None]
    I = _eye_like(L)
    if kind == "dense":
        if tab.dense is None:
            raise ValueError(
                f"method {tab.name!r} has no dense-output coefficients")
        _, lr = stage_operators(L, h, tab)
        W = tab.dense.weights(taus)          # (T, s)
        out = np.empty((len(taus),) + L.shape)
        for t in range(len(taus)):
            acc = I.copy()
            for i, w in enumerate(W[t]):
                if w != 0.0:
                    acc = acc + (hh * w) * lr[i]
            out[t] = acc
        return out
    R = rk_matrix(L, h, tab)
    if kind == "linear":
        tt = taus[:, None, None, None]
        return (1.0 - tt) * I + tt * R
    if kind == "hermite":
        LR = L @ R
        tt = taus[:, None, None, None]
        return ((1.0 + 2.0 * tt) * (1.0 - tt) ** 2 * I
                + (3.0 - 2.0 * tt) * tt**2 * R
                + hh * tt * (1.0 - tt) ** 2 * L
                + hh * (tt - 1.0) * tt**2 * LR)
    raise ValueError(f"unknown interpolation kind {kind!r}")


def multirate_matrix(L: np.ndarray, d: int, h_s: np.ndarray, M: int,
                     tab: ButcherTableau, kind: str) -> np.ndarray:
    """Amplification matrix of one multi-rate step on y' = Ly.

    The state is ordered slow-first: the final ``d`` components form the
    fast partition, advanced with M equal sub-steps of size h_s / M while
    the slow components are frozen at the tentative global step and
    interpolated by Q.  Shapes: L (B, n, n), h_s (B,); returns (B, n, n).
    """
    B, n, _ = L.shape
    ns = n - d
    A, b, c, s = tab.A, tab.b, tab.c, tab.s
    h_f = h_s / M
    hf = h_f[:, None, None]

    L_ff = L[:, ns:, ns:]
    L_fs = L[:, ns:, :ns]
    I_d = np.broadcast_to(np.eye(d), (B, d, d))

    _, lr_ff = stage_operators(L_ff, h_f, tab)
    C_ff = rk_matrix(L_ff, h_f, tab, lr=lr_ff)

    # Slow-variable interpolants at every sub-step stage time.
    taus = ((np.arange(M)[:, None] + c[None, :]) / M).ravel()   # (M*s,)
    Q = interp_matrices(kind, L, h_s, tab, taus)                # (M*s,B,n,n)
    QS = Q[:, :, :ns, :]                                        # slow rows

    # Powers of C_ff up to M.
    C_pow = [np.broadcast_to(np.eye(d), (B, d, d))]
    for _ in range(M):
        C_pow.append(C_ff @ C_pow[-1])

    S = np.zeros((B, d, n))
    for l in range(M):
        Bk: list[np.ndarray] = []
        Dl = np.zeros((B, d, n))
        for k in range(s):
            Qk = QS[l * s + k]
            acc = (hf * A[k, k]) * (L_fs @ Qk) if A[k, k] != 0.0 else None
            for j in range(k):
                if A[k, j] != 0.0:
                    term = (hf * A[k, j]) * (L_fs @ QS[l * s + j]
                                             + L_ff @ Bk[j])
                    acc = term if acc is None else acc + term
            if acc is None:
                acc = np.zeros((B, d, n))
            elif A[k, k] != 0.0:
                try:
                    acc = np.linalg.solve(I_d - (hf * A[k, k]) * L_ff, acc)
                except np.linalg.LinAlgError as exc:
                    raise np.linalg.LinAlgError(
                        f"singular fast stage factor at stage {k + 1}, "
                        f"sub-step {l + 1}") from exc
            Bk.append(acc)
            if b[k] != 0.0:
                Dl = Dl + b[k] * (L_ff @ acc + L_fs @ QS[l * s + k])
        S = S + hf * (C_pow[M - 1 - l] @ Dl)

    R_slow = rk_matrix(L, h_s, tab)[:, :ns, :]
    out = np.empty((B, n, n))
    out[:, :ns, :] = R_slow
    out[:, ns:, :ns] = S[:, :, :ns]
    out[:, ns:, ns:] = C_pow[M] + S[:, :, ns:]
    return out


def spectral_radii(R: np.ndarray) -> np.ndarray:
    """Spectral radius of each matrix in a (B, n, n) stack."""
    return np.max(np.abs(np.linalg.eigvals(R)), axis=-1)
