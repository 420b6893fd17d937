"""Lagrangian states on the unit period, their norms, and the relabeling action.

Grid convention used throughout the package: the period [0, 1) is sampled at
the uniform nodes xi_j = j/n.  The characteristic map y satisfies
y(xi + 1) = y(xi) + 1, so only its periodic part y(xi) - xi is stored; the
same convention is used for relabeling functions.  Periodic fields are
identified with their piecewise-linear interpolants, L^1 norms are trapezoid
sums (which reduce to plain means on a periodic grid) and L^infinity norms
are grid maxima.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Grid sizes of two operands do not match."""


class DomainError(ValueError):
    """Input lies outside the domain of the requested operation."""


@dataclass(frozen=True)
class Tolerances:
    """Tolerance set for membership checks and the integrator.

    compat bounds the pointwise residual of y_xi*nu = y_xi^2 U^2 + U_xi^2,
    relative to (1+h)^2.  States produced by interpolation (relabeling,
    projections) satisfy the relation only to O(1/n^2), so callers checking
    such states should scale `compat` accordingly.
    """

    compat: float = 1e-8
    quad: float = 1e-10
    f0: float = 1e-6
    clamp: float = 1e-12
    energy: float = 1e-6


def xi_grid(n: int) -> np.ndarray:
    return np.arange(n) / n


def _freeze(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def _check_grid_size(n: int) -> None:
    if n < 64 or (n & (n - 1)) != 0:
        raise DimensionError(f"grid size must be a power of two >= 64, got {n}")


def trapz_mean(values: np.ndarray) -> float:
    """Trapezoid integral of a periodic grid function over one period."""
    return float(np.mean(values))


def cumtrapz_grid(values: np.ndarray) -> np.ndarray:
    """Prefix trapezoid integral I_j = int_0^{xi_j}; I_0 = 0, length n."""
    n = len(values)
    cell = (values + np.roll(values, -1)) / (2.0 * n)
    out = np.empty(n)
    out[0] = 0.0
    np.cumsum(cell[:-1], out=out[1:])
    return out


def periodic_interp(values: np.ndarray, t) -> np.ndarray:
    """Piecewise-linear interpolation of a periodic grid function at t (any reals)."""
    n = len(values)
    tt = np.mod(np.asarray(t, dtype=float), 1.0)
    xp = np.arange(n + 1) / n
    fp = np.concatenate([values, values[:1]])
    return np.interp(tt, xp, fp)


@dataclass(frozen=True)
class LagrangianState:
    """Grid samples of (y, U, y_xi, U_xi, nu) at time t.

    `y` holds the periodic part y(xi_j) - xi_j; the derivative fields are
    carried, not recomputed from y and u.
    """

    t: float
    y: np.ndarray
    u: np.ndarray
    yxi: np.ndarray
    uxi: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        arrays = {k: _freeze(getattr(self, k)) for k in ("y", "u", "yxi", "uxi", "nu")}
        n = len(arrays["y"])
        _check_grid_size(n)
        for k, a in arrays.items():
            if a.shape != (n,):
                raise DimensionError(f"field {k} has shape {a.shape}, expected ({n},)")
            if not np.all(np.isfinite(a)):
                raise DomainError(f"field {k} contains non-finite values")
            object.__setattr__(self, k, a)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def h(self) -> float:
        """Total energy, the trapezoid integral of nu over one period."""
        return trapz_mean(self.nu)

    def y_full(self) -> np.ndarray:
        return xi_grid(self.n) + self.y

    def integral_y(self) -> float:
        """Trapezoid integral of the reconstructed y over one period."""
        return 0.5 + trapz_mean(self.y)

    def compat_residual(self) -> float:
        return float(
            np.max(np.abs(self.yxi * self.nu - (self.yxi**2 * self.u**2 + self.uxi**2)))
        )

    def replace_fields(self, **kw) -> "LagrangianState":
        fields = {k: getattr(self, k) for k in ("t", "y", "u", "yxi", "uxi", "nu")}
        fields.update(kw)
        return LagrangianState(**fields)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "t": self.t,
            "y": self.y.tolist(),
            "u": self.u.tolist(),
            "yxi": self.yxi.tolist(),
            "uxi": self.uxi.tolist(),
            "nu": self.nu.tolist(),
        }

    @staticmethod
    def from_dict(d: dict) -> "LagrangianState":
        n = int(d["n"])
        st = LagrangianState(
            t=float(d.get("t", 0.0)),
            y=d["y"], u=d["u"], yxi=d["yxi"], uxi=d["uxi"], nu=d["nu"],
        )
        if st.n != n:
            raise DimensionError(f"declared n={n} but arrays have length {st.n}")
        return st

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @staticmethod
    def load(path) -> "LagrangianState":
        with open(path) as fh:
            return LagrangianState.from_dict(json.load(fh))


def rest_state(n: int, centered: bool = False) -> LagrangianState:
    """State of the fluid at rest: y = xi, U = 0, nu = 0.

    With centered=True the characteristic map is y = xi - 1/2, which has
    zero mean and is the fixed point of the projection onto the section H.
    """
    z = np.zeros(n)
    ypart = np.full(n, -0.5) if centered else z
    return LagrangianState(t=0.0, y=ypart, u=z, yxi=np.ones(n), uxi=z.copy(), nu=z.copy())


def constant_state(n: int, c: float) -> LagrangianState:
    """Uniform velocity c: y = xi, U = c, nu = c^2 (compatible by construction)."""
    ones = np.ones(n)
    return LagrangianState(
        t=0.0, y=np.zeros(n), u=c * ones, yxi=ones,
        uxi=np.zeros(n), nu=(c * c) * ones,
    )


def random_state(n: int, seed: int, energy: float = 0.5) -> LagrangianState:
    """Smooth random state with the compatibility relation satisfied exactly.

    y_xi is a positive trigonometric polynomial with unit mean, U a smooth
    trigonometric polynomial with analytic derivative, and nu is defined by
    nu = (y_xi^2 U^2 + U_xi^2)/y_xi, so the state lies in F with
    y_xi >= 0.3 on the grid.  U is rescaled so the total energy h equals
    `energy` exactly (nu is quadratic in U).
    """
    rng = np.random.default_rng(seed)
    xi = xi_grid(n)
    modes = 3
    ay = rng.normal(size=modes)
    by = rng.normal(size=modes)
    au = rng.normal(size=modes)
    bu = rng.normal(size=modes)

    k = np.arange(1, modes + 1)
    ang = 2 * np.pi * np.outer(xi, k)
    cos, sin = np.cos(ang), np.sin(ang)

    osc = cos @ ay + sin @ by
    amp = np.max(np.abs(osc)) or 1.0
    osc *= 0.7 / amp
    yxi = 1.0 + osc
    # exact antiderivative of the oscillation, so y(xi+1) = y(xi) + 1 holds exactly
    ypart = (sin @ (ay / (2 * np.pi * k)) - (cos - 1.0) @ (by / (2 * np.pi * k))) * (0.7 / amp)

    u = cos @ au + sin @ bu
    uxi = -sin @ (au * 2 * np.pi * k) + cos @ (bu * 2 * np.pi * k)
    nu = (yxi**2 * u**2 + uxi**2) / yxi
    lam = np.sqrt(energy / max(trapz_mean(nu), 1e-300))
    return LagrangianState(t=0.0, y=ypart, u=lam * u, yxi=yxi,
                           uxi=lam * uxi, nu=lam * lam * nu)


# --------------------------------------------------------------------------
# Norms
# --------------------------------------------------------------------------

def _l1(diff: np.ndarray) -> float:
    return trapz_mean(np.abs(diff))


def _linf(diff: np.ndarray) -> float:
    return float(np.max(np.abs(diff))) if len(diff) else 0.0


def enorm_diff(a: LagrangianState, b: LagrangianState) -> float:
    """Banach-space distance ||a - b||_E over one period.

    E = V x W^{1,1}_per x L^1_per with ||f||_V = ||f||_Linf + ||f_xi||_L1;
    the y difference reduces to the difference of stored periodic parts.
    """
    if a.n != b.n:
        raise DimensionError(f"grid mismatch: {a.n} vs {b.n}")
    return (
        _linf(a.y - b.y) + _l1(a.yxi - b.yxi)
        + _linf(a.u - b.u) + _l1(a.uxi - b.uxi)
        + _l1(a.nu - b.nu)
    )


def w11_diff(a_val: np.ndarray, a_der: np.ndarray, b_val: np.ndarray, b_der: np.ndarray) -> float:
    """||f - g||_{W^{1,1}} = ||f - g||_Linf + ||f' - g'||_L1 on the grid."""
    return _linf(a_val - b_val) + _l1(a_der - b_der)


def bm_norm(x: LagrangianState) -> float:
    """||U||_{W^{1,1}} + ||y_xi||_{L^1} + ||nu||_{L^1}, the B_M membership value."""
    return _linf(x.u) + _l1(x.uxi) + _l1(x.yxi) + _l1(x.nu)


# --------------------------------------------------------------------------
# Membership
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MembershipReport:
    in_f: bool
    in_f0: bool
    in_h: bool
    c_lower: float
    alpha: float
    h: float
    enorm_bound: float
    compat_residual: float
    f0_residual: float
    y_integral: float


def check_membership(x: LagrangianState, tol: Tolerances | None = None) -> MembershipReport:
    """Grid versions of the F / F_0 / H membership inequalities.

    Reports flags and diagnostics; never raises for borderline states.
    """
    tol = tol or Tolerances()
    h = x.h
    c_lower = float(np.min(x.yxi + x.nu))
    compat = x.compat_residual()
    nonneg = float(min(np.min(x.yxi), np.min(x.nu)))
    in_f = (
        nonneg >= -tol.clamp
        and c_lower > 0.0
        and compat <= tol.compat * (1.0 + h) ** 2
    )

    f0_res = float(np.max(np.abs(x.yxi + x.nu - (1.0 + h))))
    in_f0 = in_f and f0_res <= tol.f0

    y_int = x.integral_y()
    in_h = in_f0 and abs(y_int) <= tol.quad

    if c_lower > 0 and h >= 0:
        r = (x.yxi + x.nu) / (1.0 + h)
        rmin, rmax = float(np.min(r)), float(np.max(r))
        alpha = max(rmax - 1.0, 1.0 / rmin - 1.0, 0.0) if rmin > 0 else np.inf
    else:
        alpha = np.inf

    return MembershipReport(
        in_f=in_f, in_f0=in_f0, in_h=in_h, c_lower=c_lower, alpha=float(alpha),
        h=h, enorm_bound=bm_norm(x), compat_residual=compat,
        f0_residual=f0_res, y_integral=y_int,
    )


# --------------------------------------------------------------------------
# Relabeling group
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Relabeling:
    """Monotone grid homeomorphism with f(xi+1) = f(xi) + 1.

    Stores the periodic part f(xi_j) - xi_j, plus the nodal derivative when
    it is known in closed form (constructors that know f' analytically pass
    it; composition and inversion propagate it by the chain rule).  Without
    it, centered differences of the values are used.  Construction requires
    strict monotonicity of the reconstructed map.
    """

    fpart: np.ndarray
    slope: np.ndarray | None = None

    def __post_init__(self):
        a = _freeze(self.fpart)
        _check_grid_size(len(a))
        if not np.all(np.isfinite(a)):
            raise DomainError("relabeling contains non-finite values")
        object.__setattr__(self, "fpart", a)
        if self.slope is not None:
            s = _freeze(self.slope)
            if s.shape != a.shape:
                raise DimensionError("slope array has wrong length")
            if np.min(s) <= 0.0 or not np.all(np.isfinite(s)):
                raise DomainError("carried slopes must be positive and finite")
            object.__setattr__(self, "slope", s)
        if np.min(self.slopes()) <= 0.0:
            raise DomainError("relabeling is not strictly monotone")

    @property
    def n(self) -> int:
        return len(self.fpart)

    def values(self) -> np.ndarray:
        return xi_grid(self.n) + self.fpart

    def slopes(self) -> np.ndarray:
        """Forward slopes n*(f_{j+1} - f_j) with the periodic wrap f_n = f_0 + 1."""
        fv = self.values()
        d = np.roll(fv, -1) - fv
        d[-1] += 1.0
        return d * self.n

    def slopes_centered(self) -> np.ndarray:
        fv = self.values()
        up = np.roll(fv, -1)
        dn = np.roll(fv, 1)
        up[-1] += 1.0
        dn[0] -= 1.0
        return (up - dn) * (self.n / 2.0)

    def derivative(self) -> np.ndarray:
        """Nodal f_xi: the carried closed form if present, else centered differences."""
        return self.slope if self.slope is not None else self.slopes_centered()

    def alpha(self) -> float:
        """Smallest alpha with 1/(1+alpha) <= n*(f_{j+1}-f_j) <= 1+alpha."""
        s = self.slopes()
        return max(float(np.max(s)) - 1.0, 1.0 / float(np.min(s)) - 1.0, 0.0)

    def is_identity(self) -> bool:
        return bool(np.all(self.fpart == 0.0))

    @staticmethod
    def identity(n: int) -> "Relabeling":
        return Relabeling(np.zeros(n), slope=np.ones(n))

    @staticmethod
    def shift(n: int, a: float) -> "Relabeling":
        """Translation f(xi) = xi - a."""
        return Relabeling(np.full(n, -float(a)), slope=np.ones(n))


def compose_relabelings(f: Relabeling, g: Relabeling) -> Relabeling:
    """(f o g)(xi_j) = f(g(xi_j)), sampled back on the uniform grid.

    Nodal derivatives compose by the chain rule (f' o g) g', which keeps
    the slope data at the same interpolation order as the values.
    """
    if f.n != g.n:
        raise DimensionError(f"grid mismatch: {f.n} vs {g.n}")
    gv = g.values()
    comp = gv + periodic_interp(f.fpart, gv)
    slope = periodic_interp(f.derivative(), gv) * g.derivative()
    return Relabeling(comp - xi_grid(f.n), slope=slope)


def random_relabeling(n: int, amplitude: float, seed: int) -> Relabeling:
    """Random smooth relabeling, f = xi + amplitude * (trig polynomial).

    The polynomial has at most 4 modes and is scaled so the continuum slope
    satisfies min f_xi >= 1 - amplitude.  Deterministic for a fixed seed.
    """
    if not 0.0 <= amplitude < 1.0:
        raise DomainError("amplitude must lie in [0, 1)")
    if amplitude == 0.0:
        return Relabeling.identity(n)
    rng = np.random.default_rng(seed)
    modes = 4
    a = rng.normal(size=modes)
    b = rng.normal(size=modes)
    k = np.arange(1, modes + 1)

    dense = np.arange(8192) / 8192.0
    ang_d = 2 * np.pi * np.outer(dense, k)
    gp = -np.sin(ang_d) @ (a * 2 * np.pi * k) + np.cos(ang_d) @ (b * 2 * np.pi * k)
    peak = np.max(np.abs(gp))
    if peak == 0.0:
        return Relabeling.identity(n)

    xi = xi_grid(n)
    ang = 2 * np.pi * np.outer(xi, k)
    g = np.cos(ang) @ a + np.sin(ang) @ b
    gp = -np.sin(ang) @ (a * 2 * np.pi * k) + np.cos(ang) @ (b * 2 * np.pi * k)
    scale = amplitude / peak
    return Relabeling(g * scale, slope=1.0 + gp * scale)


def apply_relabeling(x: LagrangianState, f: Relabeling) -> LagrangianState:
    """Group action X . f on the uniform grid.

    y and U are composed with f through piecewise-linear interpolation of
    the reconstructed maps.  The density-like fields follow the chain rule
    w -> (w o f) f_xi with the nodal f_xi (carried slopes, or centered
    differences of f), then receive a uniform O(1/n^2) correction that
    restores their period integrals exactly (h, the total y_xi mass and the
    mean of U_xi are invariants of the continuum action).  The identity
    relabeling returns the input unchanged.
    """
    if x.n != f.n:
        raise DimensionError(f"grid mismatch: {x.n} vs {f.n}")
    if f.is_identity():
        return x

    fv = f.values()
    frac = np.mod(fv, 1.0)
    ybar = f.fpart + periodic_interp(x.y, frac)
    ubar = periodic_interp(x.u, frac)

    fxi = f.derivative()
    if np.min(f.slopes()) <= 0.0:
        raise DomainError("relabeling is not strictly monotone")

    def transport_nonneg(w):
        c = periodic_interp(w, frac) * fxi
        target = trapz_mean(w)
        m = trapz_mean(c)
        if m > 0.0 and target >= 0.0:
            c *= target / m
        return np.maximum(c, 0.0)

    ybar_xi = transport_nonneg(x.yxi)
    nubar = transport_nonneg(x.nu)
    ubar_xi = periodic_interp(x.uxi, frac) * fxi
    ubar_xi += trapz_mean(x.uxi) - trapz_mean(ubar_xi)

    return LagrangianState(t=x.t, y=ybar, u=ubar, yxi=ybar_xi, uxi=ubar_xi, nu=nubar)
