"""Eulerian states and the maps between Eulerian and Lagrangian coordinates.

An Eulerian state is a pair (u, mu): periodic velocity samples plus an
energy measure split into an absolutely continuous density on the same
grid and a finite list of atoms.  `to_lagrangian` (the map L) inverts the
cumulative G(x) = F_mu(x) + x at the targets (1+h) xi_j and projects onto
the section H; `to_eulerian` (the map M) pushes nu dxi forward through y,
turning plateaus of y into atoms.  Up to projection the maps invert each
other; round-trip accuracy is second order in the grid spacing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import json
import numpy as np

from . import projection
from .state import (
    DimensionError,
    DomainError,
    LagrangianState,
    Tolerances,
    periodic_interp,
    trapz_mean,
    xi_grid,
    _freeze,
)


@dataclass(frozen=True)
class EulerianState:
    """Velocity samples u on x_k = k/m, density samples, and (position, mass) atoms."""

    u: np.ndarray
    density: np.ndarray
    atoms: tuple = ()

    def __post_init__(self):
        u = _freeze(self.u)
        d = _freeze(self.density)
        if u.ndim != 1 or u.shape != d.shape:
            raise DimensionError("u and density must be 1-d arrays of equal length")
        if len(u) < 4:
            raise DimensionError("x-grid must have at least 4 nodes")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(d))):
            raise DomainError("non-finite Eulerian samples")
        if np.min(d) < -1e-12 * (1.0 + np.max(np.abs(d))):
            raise DomainError("density must be nonnegative")
        atoms = tuple((float(p), float(mass)) for p, mass in self.atoms)
        pos = [a[0] for a in atoms]
        if any(not 0.0 <= p_ < 1.0 for p_ in pos):
            raise DomainError("atom positions must lie in [0, 1)")
        if any(mass <= 0.0 for _, mass in atoms):
            raise DomainError("atom masses must be positive")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise DomainError("atom positions must be strictly sorted and distinct")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "density", np.maximum(d, 0.0))
        object.__setattr__(self, "atoms", atoms)

    @property
    def m(self) -> int:
        return len(self.u)

    @property
    def h(self) -> float:
        """Total energy: trapezoid of the density plus the atom masses."""
        return trapz_mean(self.density) + sum(mass for _, mass in self.atoms)

    def atom_mass(self) -> float:
        return sum(mass for _, mass in self.atoms)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "u": self.u.tolist(),
            "density": self.density.tolist(),
            "atoms": [[p, mass] for p, mass in self.atoms],
        }

    @staticmethod
    def from_dict(d: dict) -> "EulerianState":
        st = EulerianState(u=d["u"], density=d["density"],
                           atoms=tuple((p, mass) for p, mass in d.get("atoms", [])))
        if st.m != int(d["m"]):
            raise DimensionError("declared m does not match array length")
        return st

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @staticmethod
    def load(path) -> "EulerianState":
        with open(path) as fh:
            return EulerianState.from_dict(json.load(fh))


def h1_to_eulerian(u_samples) -> EulerianState:
    """Pair u with its own H^1 energy density (u^2 + u_x^2) dx, no atoms.

    u_x is computed by centered differences on the periodic grid.
    """
    u = np.asarray(u_samples, dtype=float)
    m = len(u)
    ux = (np.roll(u, -1) - np.roll(u, 1)) * (m / 2.0)
    return EulerianState(u=u, density=u * u + ux * ux, atoms=())


@dataclass(frozen=True)
class CumulativeMeasure:
    """G(x) = F_mu(x) + x on one period, with one-sided values at breakpoints.

    Breakpoints are the x-grid nodes together with the atom positions;
    g_left/g_right bracket the jump at each breakpoint (equal where there is
    no atom).  G extends by G(x + 1) = G(x) + 1 + h.  Between breakpoints G
    is strictly increasing with G' = 1 + density.
    """

    breakpoints: np.ndarray
    g_left: np.ndarray
    g_right: np.ndarray
    dens_value: np.ndarray
    dens_slope: np.ndarray
    h: float


def cumulative_measure(e: EulerianState) -> CumulativeMeasure:
    m = e.m
    xs = xi_grid(m)
    d = e.density
    # trapezoid cumulative of the density at grid nodes
    cgrid = np.empty(m)
    cgrid[0] = 0.0
    np.cumsum((d[:-1] + d[1:]) / (2.0 * m), out=cgrid[1:])

    apos = np.array([p for p, _ in e.atoms])
    amass = np.array([mass for _, mass in e.atoms])

    bp = np.concatenate([xs, apos]) if len(apos) else xs
    order = np.argsort(bp, kind="stable")
    bp = bp[order]
    keep = np.ones(len(bp), dtype=bool)
    keep[1:] = bp[1:] > bp[:-1]
    bp = bp[keep]

    cell = np.minimum(np.floor(bp * m).astype(int), m - 1)
    slope = (np.roll(d, -1) - d) * m
    tau = bp - xs[cell]
    dens_val = d[cell] + slope[cell] * tau
    cum_ac = cgrid[cell] + d[cell] * tau + 0.5 * slope[cell] * tau * tau

    jump = np.zeros(len(bp))
    if len(apos):
        idx = np.searchsorted(bp, apos)
        jump[idx] = amass
    atoms_before = np.concatenate([[0.0], np.cumsum(jump)[:-1]])

    g_left = bp + cum_ac + atoms_before
    g_right = g_left + jump
    return CumulativeMeasure(
        breakpoints=bp, g_left=g_left, g_right=g_right,
        dens_value=dens_val, dens_slope=slope[cell], h=float(e.h),
    )


def _invert_cumulative(cm: CumulativeMeasure, targets: np.ndarray) -> np.ndarray:
    """Generalized inverse y(s) = sup{y : G(y) < s} for s in [0, 1 + h)."""
    bp = cm.breakpoints
    k = len(bp)
    y = np.empty(len(targets))

    idx = np.searchsorted(cm.g_right, targets, side="left")
    in_jump = idx < k
    in_jump[in_jump] &= cm.g_left[idx[in_jump]] <= targets[in_jump]
    y[in_jump] = bp[idx[in_jump]]

    cont = ~in_jump
    if np.any(cont):
        seg = np.searchsorted(cm.g_right, targets[cont], side="right") - 1
        seg = np.clip(seg, 0, k - 1)
        c = targets[cont] - cm.g_right[seg]
        b = 1.0 + cm.dens_value[seg]
        a = 0.5 * cm.dens_slope[seg]
        disc = np.maximum(b * b + 4.0 * a * c, 0.0)
        tau = np.where(np.abs(a) > 1e-300, 2.0 * c / (b + np.sqrt(disc)), c / b)
        width = np.diff(np.concatenate([bp, [1.0]]))[seg]
        y[cont] = bp[seg] + np.minimum(np.maximum(tau, 0.0), width)
    return y


def to_lagrangian(e: EulerianState, n: int, tol: Tolerances | None = None) -> LagrangianState:
    """The map L from Eulerian to Lagrangian coordinates, landing in H.

    y(xi_j) inverts G at (1+h) xi_j (constant across each atom's jump
    interval), y_xi comes from centered differences of the constructed y
    (so its period integral is exactly 1), nu = (1+h) - y_xi, U = u o y,
    and U_xi is filled in through the compatibility relation with the sign
    of the local slope of U.  The result is passed through the projection
    onto H.
    """
    if n < 64:
        raise DimensionError("target grid too small")
    cm = cumulative_measure(e)
    h = cm.h
    xi = xi_grid(n)
    y = _invert_cumulative(cm, (1.0 + h) * xi)

    up = np.roll(y, -1).copy()
    up[-1] = y[0] + 1.0
    dn = np.roll(y, 1).copy()
    dn[0] = y[-1] - 1.0
    yxi = (up - dn) * (n / 2.0)
    yxi = np.clip(yxi, 0.0, 1.0 + h)
    nu = (1.0 + h) - yxi

    u = periodic_interp(e.u, y)
    du = np.roll(u, -1) - np.roll(u, 1)
    sign = np.sign(du)
    uxi = sign * np.sqrt(np.maximum(yxi * nu - yxi * yxi * u * u, 0.0))

    raw = LagrangianState(t=0.0, y=y - xi, u=u, yxi=yxi, uxi=uxi, nu=nu)
    return projection.pi(raw, tol=tol)


def _hat_antideriv(s: np.ndarray) -> np.ndarray:
    """Antiderivative of the unit hat 1 - |s| on [-1, 1], clamped outside."""
    s = np.clip(s, -1.0, 1.0)
    return s - 0.5 * s * np.abs(s)


def _paint_intervals(x0: np.ndarray, x1: np.ndarray, energy: np.ndarray, m: int) -> np.ndarray:
    """Deposit interval masses onto m periodic nodes with linear (hat) weights.

    Each interval carries uniform density; its overlap integral with every
    hat basis function is evaluated in closed form, so the node totals are
    exact hat projections.  The hats partition unity, which makes the
    assignment conserve mass exactly; node totals divided by the bin width
    are second-order density samples.
    """
    accum = np.zeros(m)
    width = x1 - x0
    dens = energy / np.maximum(width, 1e-300)
    for j in range(len(x0)):
        a = x0[j] * m
        b = x1[j] * m
        if b <= a:
            k = int(np.floor(a + 0.5))
            accum[k % m] += energy[j]
            continue
        klo = int(np.floor(a))
        khi = int(np.ceil(b))
        ks = np.arange(klo, khi + 1)
        w = _hat_antideriv(b - ks) - _hat_antideriv(a - ks)
        np.add.at(accum, ks % m, (dens[j] / m) * w)
    return accum


def to_eulerian(x: LagrangianState, m: int, plateau_eps: float | None = None) -> EulerianState:
    """The map M: u(x) = U on {y = x}, mu = pushforward of nu dxi through y.

    Maximal runs of cells where the carried y_xi falls below plateau_eps
    (default 10 (1+h)/n) become atoms located at the energy-weighted mean of
    y over the run; the remaining cell energies are deposited conservatively
    on the x-grid and divided by the bin width to give the density.  U is
    checked for constancy on each plateau and a warning is issued if it
    deviates beyond interpolation accuracy.
    """
    n = x.n
    h = x.h
    if plateau_eps is None:
        plateau_eps = 10.0 * (1.0 + h) / n
    yfull = x.y_full()
    ynext = np.roll(yfull, -1).copy()
    ynext[-1] = yfull[0] + 1.0
    nunext = np.roll(x.nu, -1)
    cell_energy = (x.nu + nunext) / (2.0 * n)
    cell_slope = (x.yxi + np.roll(x.yxi, -1)) / 2.0
    plateau = cell_slope < plateau_eps

    # cyclic runs of plateau cells
    atoms_raw = []
    dens_accum = np.zeros(m)
    if np.all(plateau):
        pos = float(np.mod(np.average(yfull, weights=np.maximum(x.nu, 1e-300)), 1.0))
        atoms_raw.append((pos, float(np.sum(cell_energy))))
    else:
        start = int(np.argmin(plateau))  # a non-plateau cell to anchor the cyclic scan
        order = (np.arange(n) + start) % n
        run = []
        smooth_cells = []
        for j in order:
            if plateau[j]:
                run.append(j)
                continue
            if run:
                atoms_raw.append(_finish_run(run, yfull, ynext, cell_energy, x))
                run = []
            smooth_cells.append(j)
        if run:
            atoms_raw.append(_finish_run(run, yfull, ynext, cell_energy, x))
        idx = np.array(smooth_cells)
        dens_accum = _paint_intervals(yfull[idx], ynext[idx], cell_energy[idx], m)

    atoms = sorted((p, mass) for p, mass in atoms_raw if mass > 0.0)
    merged = []
    for p, mass in atoms:
        if merged and p - merged[-1][0] < 0.5 / m:
            merged[-1] = (merged[-1][0], merged[-1][1] + mass)
        else:
            merged.append((p, mass))
    density = dens_accum * m

    u = _u_on_grid(x, m)
    return EulerianState(u=u, density=density, atoms=tuple(merged))


def _finish_run(run, yfull, ynext, cell_energy, x: LagrangianState):
    idx = np.array(run)
    mids = (yfull[idx] + ynext[idx]) / 2.0
    w = np.maximum(cell_energy[idx], 1e-300)
    # unwrap relative to the first cell so the weighted mean is taken on a line
    base = mids[0]
    rel = np.mod(mids - base + 0.5, 1.0) - 0.5
    pos = float(np.mod(base + np.average(rel, weights=w), 1.0))
    mass = float(np.sum(cell_energy[idx]))
    uvals = x.u[idx]
    spread = float(np.max(uvals) - np.min(uvals)) if len(uvals) else 0.0
    if spread > 1e-2 * max(1.0, float(np.max(np.abs(x.u)))):
        warnings.warn(
            f"velocity varies by {spread:.3g} across a plateau; "
            "pushforward u may be ambiguous there", RuntimeWarning)
    return pos, mass


def _u_on_grid(x: LagrangianState, m: int) -> np.ndarray:
    """u(x_k) = U(xi) at any xi with y(xi) = x_k, by monotone inversion of y."""
    n = x.n
    yfull = x.y_full()
    ynodes = np.concatenate([yfull, [yfull[0] + 1.0]])
    xk = np.arange(m) / m
    targets = yfull[0] + np.mod(xk - yfull[0], 1.0)
    cell = np.clip(np.searchsorted(ynodes, targets, side="right") - 1, 0, n - 1)
    width = ynodes[cell + 1] - ynodes[cell]
    theta = np.where(width > 0, (targets - ynodes[cell]) / np.where(width > 0, width, 1.0), 0.0)
    theta = np.clip(theta, 0.0, 1.0)
    unodes = np.concatenate([x.u, x.u[:1]])
    return (1.0 - theta) * unodes[cell] + theta * unodes[cell + 1]


def blend_eulerian(ea: EulerianState, eb: EulerianState, s: float = 0.5) -> EulerianState:
    """Interpolant between two Eulerian states that stays in the admissible set.

    The velocity is blended pointwise and re-paired with its own H^1 density
    (the convex combination of densities would exceed the H^1 density of the
    blended velocity); atoms are merged with blended masses.
    """
    if ea.m != eb.m:
        raise DimensionError("x-grids differ")
    u = (1.0 - s) * ea.u + s * eb.u
    base = h1_to_eulerian(u)
    atoms = [(p, (1.0 - s) * mass) for p, mass in ea.atoms if (1.0 - s) * mass > 0]
    atoms += [(p, s * mass) for p, mass in eb.atoms if s * mass > 0]
    atoms.sort()
    merged = []
    for p, mass in atoms:
        if merged and p == merged[-1][0]:
            merged[-1] = (p, merged[-1][1] + mass)
        else:
            merged.append((p, mass))
    return EulerianState(u=u, density=base.density, atoms=tuple(merged))
