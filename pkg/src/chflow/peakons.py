"""Periodic multipeakon oracle.

A multipeakon is u(t, x) = sum_i p_i(t) G(x - q_i(t)) where G is the
period-1 Green's function of (1 - d^2/dx^2), obtained by summing the
full-line kernel (1/2) e^{-|x|} over integer shifts:

    G(x) = cosh(frac(x) - 1/2) / (2 sinh(1/2)).

The amplitudes and positions follow the canonical Hamiltonian system with
H(p, q) = (1/2) sum_{ij} p_i p_j G(q_i - q_j); at the kernel corner the
symmetric convention G'(0) = 0 is used.  The integrator stops before
collisions; the PDE solver, not this oracle, owns post-collision dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import DomainError
from .transforms import EulerianState

_TWO_SINH_HALF = 2.0 * np.sinh(0.5)


def green(x) -> np.ndarray | float:
    """Period-1 kernel G with (1 - d^2)G = delta; continuous, G' jumps by -1 at integers."""
    s = np.mod(x, 1.0)
    return np.cosh(s - 0.5) / _TWO_SINH_HALF


def green_deriv(x) -> np.ndarray | float:
    """G' with the symmetric convention G'(0) = 0 at the corner."""
    s = np.mod(np.asarray(x, dtype=float), 1.0)
    out = np.sinh(s - 0.5) / _TWO_SINH_HALF
    out = np.where(s == 0.0, 0.0, out)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PeakonState:
    p: np.ndarray
    q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        q = np.array(self.q, dtype=float)
        if p.shape != q.shape or p.ndim != 1 or len(p) == 0:
            raise DomainError("p and q must be equal-length nonempty 1-d arrays")
        if np.any(np.diff(q) <= 0):
            raise DomainError("positions must be strictly sorted")
        if np.any(q < 0) or np.any(q >= 1):
            raise DomainError("positions must lie in [0, 1)")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", float(self.t))


def antisymmetric_pair(amplitude: float, delta: float) -> PeakonState:
    """Peakon-antipeakon data p = (A, -A) at q = (1/2 - delta, 1/2 + delta).

    The conservative solution of this configuration vanishes pointwise at
    the collision time and re-emerges afterwards.
    """
    if amplitude <= 0:
        raise DomainError("amplitude must be positive")
    if not 0.0 < delta < 0.25:
        raise DomainError("delta must lie in (0, 1/4)")
    return PeakonState(p=np.array([amplitude, -amplitude]),
                       q=np.array([0.5 - delta, 0.5 + delta]))


def eval_u(s: PeakonState, x) -> np.ndarray:
    """u(x) = sum_i p_i G(x - q_i)."""
    xv = np.asarray(x, dtype=float)
    return green(xv[..., None] - s.q) @ s.p


def eval_ux(s: PeakonState, x) -> np.ndarray:
    xv = np.asarray(x, dtype=float)
    return green_deriv(xv[..., None] - s.q) @ s.p


def sample_u(s: PeakonState, m: int) -> EulerianState:
    """Eulerian snapshot on the m-grid with the exact piecewise-cosh energy density."""
    x = np.arange(m) / m
    u = eval_u(s, x)
    ux = eval_ux(s, x)
    return EulerianState(u=u, density=u * u + ux * ux, atoms=())


def hamiltonian(s: PeakonState) -> float:
    """H(p, q) = (1/2) sum_{ij} p_i p_j G(q_i - q_j), conserved by the flow."""
    gm = green(s.q[:, None] - s.q[None, :])
    return 0.5 * float(s.p @ gm @ s.p)


def total_energy(s: PeakonState) -> float:
    """H^1 energy of the profile, int (u^2 + u_x^2) dx = 2 H(p, q)."""
    return 2.0 * hamiltonian(s)


def _rhs(q: np.ndarray, p: np.ndarray):
    dq = q[:, None] - q[None, :]
    qdot = green(dq) @ p
    pdot = -p * (green_deriv(dq) @ p)
    return qdot, pdot


@dataclass(frozen=True)
class PeakonTrajectory:
    times: np.ndarray
    states: tuple
    halted: bool
    halt_time: float | None

    def final(self) -> PeakonState:
        return self.states[-1]


def evolve_peakons(s0: PeakonState, dt: float, t_end: float,
                   margin_steps: float = 10.0) -> PeakonTrajectory:
    """Fixed-step RK4 on the peakon Hamiltonian system.

    Stops early (halted=True) when the minimal cyclic gap between positions
    drops below margin_steps * dt * max|u|, reporting the near-collision
    time; the returned trajectory is valid up to that point.
    """
    if dt <= 0 or t_end < 0:
        raise DomainError("dt must be positive and t_end nonnegative")
    steps = int(round(t_end / dt))
    q = np.array(s0.q, dtype=float)
    p = np.array(s0.p, dtype=float)
    t = s0.t
    times = [t]
    states = [PeakonState(p=p.copy(), q=np.mod(q, 1.0), t=t)]

    def margin_ok(qv, pv):
        if len(qv) == 1:
            return True
        qs = np.sort(np.mod(qv, 1.0))
        gaps = np.diff(np.concatenate([qs, qs[:1] + 1.0]))
        ub = float(np.sum(np.abs(pv))) * float(green(0.0))
        return float(np.min(gaps)) >= margin_steps * dt * max(ub, 1e-30)

    halted = False
    halt_time = None
    for _ in range(steps):
        if not margin_ok(q, p):
            halted = True
            halt_time = t
            break
        k1q, k1p = _rhs(q, p)
        k2q, k2p = _rhs(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
        k3q, k3p = _rhs(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
        k4q, k4p = _rhs(q + dt * k3q, p + dt * k3p)
        q = q + (dt / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        p = p + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        t += dt
        qm = np.mod(q, 1.0)
        order = np.argsort(qm)
        states.append(PeakonState(p=p[order], q=qm[order], t=t))
        times.append(t)

    return PeakonTrajectory(times=np.array(times), states=tuple(states),
                            halted=halted, halt_time=halt_time)
