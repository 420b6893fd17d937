"""Periodic nonlocal operators Q and P and their xi-derivatives.

Both operators are two-term periodic kernel integrals against the weight
v = U^2 y_xi + nu: a sinh/cosh term with prefactor 1/(2(e-1)) and a
signed-exponential term with prefactor 1/4.  The quadrature integrates eta
over the wrapped window (xi_j - 1, xi_j], which makes the discretization
invariant under cyclic grid shifts; the node at eta = xi_j, where the signed
kernel jumps, contributes the average of its two one-sided limits (zero for
Q, (1+e)/(4(e-1)) v_j for P; equivalently sign(0) = 0).

For eta in the wrapped window the combined off-diagonal kernels reduce to

    Q: (exp(D) - exp(1-D)) / (4(e-1)),   P: (exp(D) + exp(1-D)) / (4(e-1)),

with D = y(xi_j) - y(eta) in (0, 1).  `qp_reference` evaluates these sums
row by row in O(n^2); `qp_fast` factorizes exp(D) = exp(y_j) * exp(-y_eta)
into prefix/suffix sums and runs in O(n).  Before exponentiation y is
shifted additively into [0, 1]; the shift cancels in all kernel differences
and keeps every exponential bounded by e.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import DomainError, LagrangianState, xi_grid

_E = float(np.e)
_C4 = 1.0 / (4.0 * (_E - 1.0))
_P_DIAG = (_E + 1.0) * _C4


@dataclass(frozen=True)
class QPResult:
    q: np.ndarray
    p: np.ndarray
    qxi: np.ndarray
    pxi: np.ndarray


def kernel_weight(x: LagrangianState) -> np.ndarray:
    """The integrand weight v = U^2 y_xi + nu."""
    return x.u**2 * x.yxi + x.nu


def _require_f(x: LagrangianState) -> None:
    slack = 1e-9 * (1.0 + x.h)
    if np.min(x.yxi) < -slack or np.min(x.nu) < -slack:
        raise DomainError("state outside F: negative y_xi or nu")
    if np.min(x.yxi + x.nu) <= 0.0:
        raise DomainError("state outside F: y_xi + nu vanishes on the grid")


def _derivatives(q, p, x: LagrangianState):
    qxi = -0.5 * x.nu - (0.5 * x.u**2 - p) * x.yxi
    pxi = q * x.yxi
    return qxi, pxi


def qp_reference(x: LagrangianState, block: int = 256) -> QPResult:
    """Direct double-loop trapezoid quadrature of the periodic kernels."""
    _require_f(x)
    n = x.n
    z = x.y_full()
    z = z - z[0]  # normalization shift; cancels in kernel differences
    v = kernel_weight(x)
    dxi = 1.0 / n

    q = np.empty(n)
    p = np.empty(n)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        rows = np.arange(lo, hi)
        # representative of eta in (xi_j - 1, xi_j]: subtract one period above j
        shift_blk = (np.arange(n)[None, :] > rows[:, None]).astype(float)
        d = z[rows][:, None] - z[None, :] + shift_blk
        ed = np.exp(d)
        er = np.exp(1.0 - d)
        kq = (ed - er) * _C4
        kp = (ed + er) * _C4
        kq[np.arange(hi - lo), rows] = 0.0
        kp[np.arange(hi - lo), rows] = _P_DIAG
        q[lo:hi] = (kq @ v) * dxi
        p[lo:hi] = (kp @ v) * dxi

    qxi, pxi = _derivatives(q, p, x)
    return QPResult(q=q, p=p, qxi=qxi, pxi=pxi)


def qp_fast_fields(ypart: np.ndarray, u: np.ndarray, yxi: np.ndarray, nu: np.ndarray):
    """O(n) prefix-sum evaluation of (Q, P) from raw field arrays."""
    n = len(ypart)
    z = xi_grid(n) + ypart
    z = z - z[0]
    v = u * u * yxi + nu
    dxi = 1.0 / n

    em = np.exp(-z) * v   # e^{-y_eta} v
    ep = np.exp(z) * v    # e^{+y_eta} v
    # exclusive prefix sums A_j = sum_{k<j}
    am = np.empty(n)
    ap = np.empty(n)
    am[0] = 0.0
    ap[0] = 0.0
    np.cumsum(em[:-1], out=am[1:])
    np.cumsum(ep[:-1], out=ap[1:])
    tm = am[-1] + em[-1]
    tp = ap[-1] + ep[-1]

    # sum over k != j of e^{-y~_k} v_k, with y~_k = y_k - 1 for k > j
    sm = am + _E * (tm - am - em)
    sp = ap + (tp - ap - ep) / _E

    ez = np.exp(z)
    emz = np.exp(-z)
    q = (_C4 * dxi) * (ez * sm - _E * emz * sp)
    p = (_C4 * dxi) * (ez * sm + _E * emz * sp) + (_P_DIAG * dxi) * v
    return q, p


def qp_fast(x: LagrangianState) -> QPResult:
    """Prefix-sum evaluation of Q and P; identical contract to qp_reference."""
    _require_f(x)
    q, p = qp_fast_fields(x.y, x.u, x.yxi, x.nu)
    qxi, pxi = _derivatives(q, p, x)
    return QPResult(q=q, p=p, qxi=qxi, pxi=pxi)
