import numpy as np
import pytest

from mrrk.newton import NewtonConfig
from mrrk.odecore import OdeProblem


def make_linear_problem(L, y0=None, t_span=(0.0, 1.0), name="linear"):
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if y0 is None:
        y0 = np.ones(n)
    nz = [tuple(np.nonzero(L[i])[0]) or (i,) for i in range(n)]
    return OdeProblem(
        N=n,
        rhs=lambda y, t, out: np.matmul(L, y, out=out),
        t_span=t_span,
        y0=np.asarray(y0, dtype=float),
        dependency=lambda i: nz[i],
        jacobian=lambda y, t: L,
        name=name,
    )


@pytest.fixture
def tight_newton():
    return NewtonConfig(max_iters=50, rel_tol=1e-14, abs_tol=1e-14)
