"""Registry of Runge-Kutta methods with validated coefficients.

Each method is described by a Butcher tableau (A, b, c, optional embedded
weights b_hat) plus, where available, the coefficient matrix B* of the
associated continuous output (dense output) interpolant

    u(t_n + tau*h) = u_n + h * sum_i b*_i(tau) * K_i,
    b*_i(tau) = sum_j B*[i, j] * tau**(j+1).

Coefficients are evaluated in exact rational or closed-form arithmetic at
module import and stored as doubles, which avoids transcription errors on
the long rational coefficients of the ESDIRK methods.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "ButcherTableau",
    "DenseOutputCoeffs",
    "MethodNotFound",
    "get_method",
    "method_names",
    "validate_tableau",
    "tableau_from_json",
]


@dataclass(frozen=True)
class DenseOutputCoeffs:
    """Continuous output coefficients b*_{ij} for tau-polynomials.

    ``B_star[i, j]`` is the coefficient of tau**(j+1) in b*_i(tau); there is
    no constant term, so every b*_i(0) = 0 and the interpolant reproduces
    u_n at the left endpoint.
    """

    p_star: int
    B_star: np.ndarray  # shape (s, p_star)

    def weights(self, tau):
        """Evaluate the stage weight vector b*(tau).

        ``tau`` may be a scalar or an array; the polynomial degree axis is
        contracted, leaving ``tau.shape + (s,)``.
        """
        tau = np.asarray(tau, dtype=float)
        powers = tau[..., None] ** np.arange(1, self.p_star + 1)
        return powers @ self.B_star.T

    @property
    def endpoint_weights(self) -> np.ndarray:
        return self.B_star.sum(axis=1)


@dataclass(frozen=True)
class ButcherTableau:
    name: str
    A: np.ndarray          # (s, s)
    b: np.ndarray          # (s,)
    c: np.ndarray          # (s,)
    p: int
    kind: str              # "explicit" | "dirk" | "esdirk"
    b_hat: np.ndarray | None = None
    p_hat: int | None = None
    dense: DenseOutputCoeffs | None = None

    @property
    def s(self) -> int:
        return len(self.b)

    @property
    def q(self) -> int:
        """Order governing step-size control: min(p, p_hat).

        Methods without an embedded pair use step doubling for error
        estimation, whose estimate carries the full order p; we therefore
        take q = p in that case.
        """
        if self.p_hat is None:
            return self.p
        return min(self.p, self.p_hat)

    @property
    def is_explicit(self) -> bool:
        return self.kind == "explicit"

    @property
    def gamma(self) -> float:
        """Diagonal stage coefficient (0.0 for explicit methods)."""
        if self.kind == "explicit":
            return 0.0
        return float(self.A[self.s - 1, self.s - 1])

    @property
    def explicit_first_stage(self) -> bool:
        return self.kind in ("explicit", "esdirk")

    def diag(self, i: int) -> float:
        """a_ii for stage i, honoring the explicit-first-stage convention."""
        return float(self.A[i, i])


class MethodNotFound(KeyError):
    pass


def _frac_matrix(rows):
    return np.array([[float(Fraction(x)) for x in row] for row in rows])


# ----------------------------------------------------------------------------
# erk4: the classical four-stage fourth-order explicit method.  No embedded
# pair and no dense output; adaptive use relies on step doubling and cubic
# Hermite interpolation.
# ----------------------------------------------------------------------------

def _make_erk4() -> ButcherTableau:
    A = _frac_matrix([
        ["0", "0", "0", "0"],
        ["1/2", "0", "0", "0"],
        ["0", "1/2", "0", "0"],
        ["0", "0", "1", "0"],
    ])
    b = np.array([1 / 6, 2 / 6, 2 / 6, 1 / 6])
    c = np.array([0.0, 0.5, 0.5, 1.0])
    return ButcherTableau("erk4", A, b, c, p=4, kind="explicit")


# ----------------------------------------------------------------------------
# erk4-owren: the six-stage fourth-order explicit method with an optimal
# degree-4 continuous extension (Owren and Zennaro, 1992).  The b weights are
# the endpoint values b*(1) of the continuous extension, which satisfy all
# eight order-4 conditions exactly.
# ----------------------------------------------------------------------------

def _make_owren() -> tuple[ButcherTableau, DenseOutputCoeffs]:
    A_rows = [
        ["0", "0", "0", "0", "0", "0"],
        ["1/6", "0", "0", "0", "0", "0"],
        ["44/1369", "363/1369", "0", "0", "0", "0"],
        ["3388/4913", "-8349/4913", "8140/4913", "0", "0", "0"],
        ["-36764/408375", "767/1125", "-32708/136125", "210392/408375", "0", "0"],
        ["1697/18876", "0", "50653/116160", "299693/1626240", "3375/11648", "0"],
    ]
    A = _frac_matrix(A_rows)
    B_rows = [
        ["1", "-104217/37466", "1806901/618189", "-866577/824252"],
        ["0", "0", "0", "0"],
        ["0", "861101/230560", "-2178079/380424", "12308679/5072320"],
        ["0", "-63869/293440", "6244423/5325936", "-7816583/10144640"],
        ["0", "-1522125/762944", "982125/190736", "-624375/217984"],
        ["0", "165/131", "-461/131", "296/131"],
    ]
    B_star = _frac_matrix(B_rows)
    dense = DenseOutputCoeffs(p_star=4, B_star=B_star)
    # Endpoint weights in exact arithmetic; the continuous extension at
    # tau = 1 is the discrete fourth-order method.
    b = np.array([
        float(sum(Fraction(x) for x in row)) for row in B_rows
    ])
    c = np.array([float(Fraction(x)) for x in
                  ["0", "1/6", "11/37", "11/17", "13/15", "1"]])
    tab = ButcherTableau("erk4-owren", A, b, c, p=4, kind="explicit",
                         dense=dense)
    return tab, dense


# ----------------------------------------------------------------------------
# esdirk3: ESDIRK, 4 stages, order 3, stiffly accurate, L-stable, with an
# embedded order-2 pair and a degree-3 continuous output.
# ----------------------------------------------------------------------------

_ESDIRK3_GAMMA = 0.43586652150845899941601945


def _make_esdirk3() -> tuple[ButcherTableau, DenseOutputCoeffs]:
    g = Fraction(43586652150845899941601945, 10**26)
    c3 = Fraction(3, 5)
    a32 = c3 * (c3 - 2 * g) / (4 * g)
    a31 = c3 - a32 - g
    b2 = (-2 + 3 * c3 + 6 * g * (1 - c3)) / (12 * g * (c3 - 2 * g))
    abar = 1 - 6 * g + 6 * g * g
    b3 = abar / (3 * c3 * (c3 - 2 * g))
    b1 = 1 - b2 - b3 - g
    A = np.array([
        [0.0, 0.0, 0.0, 0.0],
        [float(g), float(g), 0.0, 0.0],
        [float(a31), float(a32), float(g), 0.0],
        [float(b1), float(b2), float(b3), float(g)],
    ])
    b = A[3].copy()
    c = np.array([0.0, float(2 * g), float(c3), 1.0])
    # Continuous output coefficients.  The sign of the tau^2 coefficient in
    # row 3 is chosen so that b*(1) = b holds (endpoint consistency), which
    # also makes the tau^2 column sum vanish like the other columns.
    B_rows = [
        ["6071615849858/5506968783323", "-9135504192562/5563158936341",
         "5884850621193/8091909798020"],
        ["24823866123060/14064067831369", "-184358657789355/34679930461469",
         "40093531604824/13565043189019"],
        ["-4639021340861/5641321412596", "36951656213070/8103384546449",
         "-9445293799577/3414897167914"],
        ["-4782987747279/4575882152666", "22547150295437/9402010570133",
         "-8621837051676/9402290144509"],
    ]
    dense = DenseOutputCoeffs(p_star=3, B_star=_frac_matrix(B_rows))
    b_hat = _embedded_weights(A, b, c, p_hat=2)
    tab = ButcherTableau("esdirk3", A, b, c, p=3, kind="esdirk",
                         b_hat=b_hat, p_hat=2, dense=dense)
    return tab, dense


# ----------------------------------------------------------------------------
# esdirk4: ESDIRK, 6 stages, order 4, stiffly accurate, L-stable, with an
# embedded order-3 pair and a degree-4 continuous output.
# ----------------------------------------------------------------------------

def _make_esdirk4() -> tuple[ButcherTableau, DenseOutputCoeffs]:
    # Closed forms in the field Q(sqrt(2)), evaluated via (p, q) -> p + q*r2.
    r2 = math.sqrt(2.0)

    def q2(p, q):
        return float(p) + float(q) * r2

    g = 0.25
    c3 = q2(Fraction(2, 4), Fraction(-1, 4))
    c4 = 5 / 8
    c5 = 26 / 25
    a32 = q2(Fraction(1, 8), Fraction(-1, 8))
    a31 = c3 - a32 - g
    a42 = q2(Fraction(5, 64), Fraction(-7, 64))
    a43 = q2(Fraction(7, 32), Fraction(7, 32))
    a41 = c4 - a42 - a43 - g
    a52 = q2(Fraction(-13796, 125000), Fraction(-54539, 125000))
    a53 = q2(Fraction(506605, 437500), Fraction(132109, 437500))
    a54 = q2(Fraction(-97 * 166, 109375), Fraction(376 * 166, 109375))
    a51 = c5 - a52 - a53 - a54 - g
    b2 = q2(Fraction(1181, 13782), Fraction(-987, 13782))
    b3 = q2(Fraction(-267 * 47, 273343), Fraction(1783 * 47, 273343))
    b4 = q2(Fraction(22922 * 16, 571953), Fraction(-3525 * 16, 571953))
    b5 = q2(Fraction(-97 * 15625, 90749876), Fraction(-376 * 15625, 90749876))
    b1 = 1 - b2 - b3 - b4 - b5 - g
    A = np.array([
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [g, g, 0.0, 0.0, 0.0, 0.0],
        [a31, a32, g, 0.0, 0.0, 0.0],
        [a41, a42, a43, g, 0.0, 0.0],
        [a51, a52, a53, a54, g, 0.0],
        [b1, b2, b3, b4, b5, g],
    ])
    b = A[5].copy()
    c = np.array([0.0, 0.5, c3, c4, c5, 1.0])
    B_rows = [
        ["11963910384665/12483345430363", "-69996760330788/18526599551455",
         "32473635429419/7030701510665", "-14668528638623/8083464301755"],
        ["11963910384665/12483345430363", "-69996760330788/18526599551455",
         "32473635429419/7030701510665", "-14668528638623/8083464301755"],
        ["-28603264624/1970169629981", "102610171905103/26266659717953",
         "-38866317253841/6249835826165", "21103455885091/7774428730952"],
        ["-3524425447183/2683177070205", "74957623907620/12279805097313",
         "-26705717223886/4265677133337", "30155591475533/15293695940061"],
        ["-17173522440186/10195024317061", "113853199235633/9983266320290",
         "-121105382143155/6658412667527", "119853375102088/14336240079991"],
        ["27308879169709/13030500014233", "-84229392543950/6077740599399",
         "1102028547503824/51424476870755", "-63602213973224/6753880425717"],
    ]
    dense = DenseOutputCoeffs(p_star=4, B_star=_frac_matrix(B_rows))
    b_hat = _embedded_weights(A, b, c, p_hat=3)
    tab = ButcherTableau("esdirk4", A, b, c, p=4, kind="esdirk",
                         b_hat=b_hat, p_hat=3, dense=dense)
    return tab, dense


def _embedded_weights(A, b, c, p_hat):
    """Construct embedded weights of order exactly ``p_hat``.

    The weight vector solves the order conditions up to p_hat and is chosen
    as b + t*v where v is the null-space direction of the condition matrix
    that maximally violates the next-order quadrature condition; the offset
    is scaled so the violation of sum(bhat * c**p_hat) is 0.05.  This keeps
    the error estimator asymptotically proportional to h**(p_hat+1) with a
    well-conditioned leading constant.
    """
    s = len(b)
    rows = [np.ones(s)]
    for k in range(1, p_hat):
        rows.append(c**k)
    # bushy-tree condition b.A.c = 1/6 enters at order 3
    if p_hat >= 3:
        rows.append(A @ c)
    M = np.vstack(rows)
    # Null space of the condition matrix.
    _, sv, Vt = np.linalg.svd(M)
    null = Vt[np.sum(sv > 1e-12):]
    # Direction maximizing the violation of the order-(p_hat+1) quadrature
    # condition sum(w * c**p_hat).
    target = null @ (c**p_hat)
    if np.allclose(target, 0.0):
        raise ValueError("cannot construct embedded weights: degenerate c")
    v = null.T @ target
    v /= np.linalg.norm(v)
    scale = 0.05 / abs(v @ (c**p_hat))
    return b + scale * v


_REGISTRY: dict[str, ButcherTableau] = {}


def _build_registry():
    erk4 = _make_erk4()
    owren, _ = _make_owren()
    e3, _ = _make_esdirk3()
    e4, _ = _make_esdirk4()
    for t in (erk4, owren, e3, e4):
        _REGISTRY[t.name] = t


_build_registry()


def method_names() -> list[str]:
    return sorted(_REGISTRY)


def get_method(name: str) -> ButcherTableau:
    """Look up a registered method by identifier."""
    try:
        return _REGISTRY[name]
    except KeyError:
        raise MethodNotFound(
            f"unknown method {name!r}; registered methods: "
            f"{', '.join(method_names())}"
        ) from None


@dataclass
class ValidationReport:
    name: str
    checks: dict[str, float] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def record(self, label: str, residual: float, tol: float):
        self.checks[label] = residual
        if not (abs(residual) <= tol):
            self.failures.append(label)


def validate_tableau(tab: ButcherTableau, tol: float = 1e-12) -> ValidationReport:
    """Check structural invariants of a tableau; report residuals."""
    rep = ValidationReport(tab.name)
    rep.record("sum_b", float(tab.b.sum() - 1.0), tol)
    row_resid = float(np.max(np.abs(tab.A.sum(axis=1) - tab.c)))
    rep.record("row_sums", row_resid, tol)
    s = tab.s
    if tab.kind == "explicit":
        upper = float(np.max(np.abs(np.triu(tab.A))))
        rep.record("strictly_lower", upper, 0.0)
    elif tab.kind == "esdirk":
        rep.record("first_stage_explicit", float(abs(tab.A[0, 0])), 0.0)
        gam = tab.A[1, 1]
        diag_resid = float(np.max(np.abs(np.diag(tab.A)[1:] - gam)))
        rep.record("constant_diagonal", diag_resid, tol)
        if not gam > 0:
            rep.failures.append("positive_gamma")
        upper = float(np.max(np.abs(np.triu(tab.A, 1))))
        rep.record("lower_triangular", upper, 0.0)
    elif tab.kind == "dirk":
        if not np.all(np.diag(tab.A) > 0):
            rep.failures.append("positive_diagonal")
        upper = float(np.max(np.abs(np.triu(tab.A, 1))))
        rep.record("lower_triangular", upper, 0.0)
    else:
        rep.failures.append(f"unknown kind {tab.kind!r}")
    if tab.b_hat is not None:
        rep.record("sum_b_hat", float(tab.b_hat.sum() - 1.0), tol)
        if tab.p_hat is None:
            rep.failures.append("p_hat_missing")
    if tab.dense is not None:
        if tab.dense.B_star.shape != (s, tab.dense.p_star):
            rep.failures.append("b_star_shape")
        # Endpoint consistency is a property of the method, not an
        # invariant; record the residual for information.
        resid = float(np.max(np.abs(tab.dense.endpoint_weights - tab.b)))
        rep.checks["dense_endpoint"] = resid
    return rep


def endpoint_consistent(tab: ButcherTableau, tol: float = 1e-12) -> bool:
    """Whether the dense output reproduces the discrete step at tau = 1."""
    if tab.dense is None:
        return False
    return bool(np.max(np.abs(tab.dense.endpoint_weights - tab.b)) <= tol)


def tableau_from_json(doc: str | dict) -> ButcherTableau:
    """Build a user tableau from a JSON document.

    Expected keys: name, A (row-major), b, c, p, kind; optional b_hat,
    p_hat, b_star (row-major s x p_star).
    """
    data = json.loads(doc) if isinstance(doc, str) else doc
    A = np.asarray(data["A"], dtype=float)
    b = np.asarray(data["b"], dtype=float)
    c = np.asarray(data["c"], dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be a square matrix")
    s = A.shape[0]
    if b.shape != (s,) or c.shape != (s,):
        raise ValueError(f"b and c must have length {s}")
    b_hat = data.get("b_hat")
    if b_hat is not None and len(b_hat) != s:
        raise ValueError(f"b_hat must have length {s}")
    dense = None
    if data.get("b_star") is not None:
        B = np.asarray(data["b_star"], dtype=float)
        if B.ndim != 2 or B.shape[0] != s:
            raise ValueError(f"b_star must have {s} rows")
        dense = DenseOutputCoeffs(p_star=B.shape[1], B_star=B)
    tab = ButcherTableau(
        name=data["name"], A=A, b=b, c=c, p=int(data["p"]),
        kind=data["kind"],
        b_hat=None if b_hat is None else np.asarray(b_hat, dtype=float),
        p_hat=None if data.get("p_hat") is None else int(data["p_hat"]),
        dense=dense,
    )
    rep = validate_tableau(tab)
    if not rep.ok:
        raise ValueError(f"invalid tableau {tab.name!r}: {rep.failures}")
    return tab
