"""Characteristic curves of the normalized PFZ and FFZ transport equations.

Both zone velocities are affine in x, so along a characteristic
``d xi / ds = a(s) + b(s) * xi``. Curves are traced backward with classical
RK4 on the trajectory micro-grid; the closed-form solution through (t, 1)
and the analytic foot derivatives use composite trapezoid quadrature on the
same grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import RegimeError
from .model import DEFAULT_GUARD, interface_velocity, net_flow_rate

PFZ = "pfz"
FFZ = "ffz"

BISECTION_ITERS = 50
BISECTION_RTOL = 1e-12


@dataclass(frozen=True)
class InterfaceTrajectory:
    """Samples of (l(t), f_p(t, 1)) on strictly increasing nodes; linear in between."""

    times: np.ndarray
    l: np.ndarray
    fp1: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory nodes must be strictly increasing")

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def at(self, s):
        return np.interp(s, self.times, self.l), np.interp(s, self.times, self.fp1)

    def distance(self, other: "InterfaceTrajectory") -> float:
        """Discrete C0 product norm: max over components of the nodal max."""
        return float(max(np.max(np.abs(self.l - other.l)), np.max(np.abs(self.fp1 - other.fp1))))

    @classmethod
    def constant(cls, times, l0: float, fp10: float) -> "InterfaceTrajectory":
        times = np.asarray(times, dtype=float)
        return cls(times, np.full(times.shape, l0), np.full(times.shape, fp10))


@dataclass(frozen=True)
class InitialFoot:
    beta: float


@dataclass(frozen=True)
class BoundaryFoot:
    tau: float


Foot = Union[InitialFoot, BoundaryFoot]


class Characteristics:
    """Velocity fields of one window: the pair (params, signals) plus a trajectory."""

    def __init__(self, params, signals, traj: InterfaceTrajectory, guard: float = DEFAULT_GUARD):
        self.params = params
        self.signals = signals
        self.traj = traj
        self.guard = guard

    # affine coefficients: alpha(s, x) = a(s) + b(s) x
    def coefficients(self, zone: str, s):
        p = self.params
        l, fp1 = self.traj.at(s)
        N = self.signals.N(s)
        F = interface_velocity(p, l, N, fp1, self.guard)
        if zone == PFZ:
            return p.zeta * N / l, -F / l
        Fd = net_flow_rate(p, l, N)
        return (p.zeta * Fd / (p.rho0 * p.V_eff) - F) / (p.L - l), F / (p.L - l)

    def velocity(self, zone: str, s, xi):
        a, b = self.coefficients(zone, s)
        v = a + b * xi
        if np.any(v <= 0):
            raise RegimeError(f"nonpositive {zone.upper()} velocity along a characteristic")
        return v

    def _rk4(self, zone, s, y, h):
        k1 = self.velocity(zone, s, y)
        k2 = self.velocity(zone, s + 0.5 * h, y + 0.5 * h * k1)
        k3 = self.velocity(zone, s + 0.5 * h, y + 0.5 * h * k2)
        k4 = self.velocity(zone, s + h, y + h * k3)
        return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def _bisect(self, zone, s0, y0, hmax, target):
        """Smallest |theta| <= |hmax| with RK4(s0, y0, theta) == target (sign change bracketed).

        Illinois-modified regula falsi on the bracket [0, hmax]; the RK4 step is
        smooth in theta, so this converges superlinearly.
        """
        lo = np.zeros_like(hmax)
        hi = hmax.copy()
        f_lo = y0 - target
        f_hi = self._rk4(zone, s0, y0, hi) - target
        tol = BISECTION_RTOL * max(self.traj.end - self.traj.start, 1e-300)
        side = np.zeros(lo.shape, dtype=int)
        mid = hi
        for _ in range(BISECTION_ITERS):
            denom = f_hi - f_lo
            mid = np.where(denom != 0, lo - f_lo * (hi - lo) / np.where(denom != 0, denom, 1.0),
                           0.5 * (lo + hi))
            fm = self._rk4(zone, s0, y0, mid) - target
            same_lo = np.sign(fm) == np.sign(f_lo)
            lo, f_lo, hi, f_hi = (np.where(same_lo, mid, lo), np.where(same_lo, fm, f_lo),
                                  np.where(same_lo, hi, mid), np.where(same_lo, f_hi, fm))
            # halve the stale end point's value when one side keeps moving
            f_hi = np.where(same_lo & (side == 1), 0.5 * f_hi, f_hi)
            f_lo = np.where(~same_lo & (side == -1), 0.5 * f_lo, f_lo)
            side = np.where(same_lo, 1, -1)
            if np.all((np.abs(hi - lo) <= tol) | (np.abs(fm) <= 1e-15)):
                break
        return mid

    # ---- rate integrals ------------------------------------------------

    def rate(self, zone: str, s):
        """-d alpha / dx, so that d xi / dx (s; t, x) = exp(int_s^t rate)."""
        return -self.coefficients(zone, s)[1]

    def cumulative_rate(self, zone: str, s):
        """Trapezoid antiderivative of ``rate`` from the window start, at arbitrary s."""
        ts = self.traj.times
        q = self.rate(zone, ts)
        Q = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(ts) * (q[1:] + q[:-1]))])
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(ts, s, side="right") - 1, 0, ts.size - 1)
        return Q[k] + 0.5 * (s - ts[k]) * (q[k] + self.rate(zone, s))

    def stretch(self, zone: str, s, t):
        """exp(int_s^t rate): the x-derivative of the backward flow map."""
        return np.exp(self.cumulative_rate(zone, t) - self.cumulative_rate(zone, s))

    # ---- tracing ------------------------------------------------------

    def trace(self, zone: str, t, x) -> "Paths":
        """Trace characteristics backward from points (t_i, x_i) to their feet."""
        ts = self.traj.times
        K = ts.size - 1
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        t = np.atleast_1d(t).astype(float).copy()
        x = np.atleast_1d(x).astype(float).copy()
        n = t.size
        if np.any(t < ts[0] - 1e-12) or np.any(t > ts[-1] + 1e-12):
            raise ValueError("trace start time outside the trajectory window")
        t = np.clip(t, ts[0], ts[-1])
        j = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, K)

        P = np.full((K + 1, n), np.nan)
        xi = x.copy()
        alive = np.ones(n, dtype=bool)
        tau = np.full(n, np.nan)

        def step(idx, s0, h):
            y0 = xi[idx]
            y1 = self._rk4(zone, s0, y0, -h)
            hit = y1 < 0.0
            if np.any(hit):
                theta = self._bisect(zone, s0[hit], y0[hit], -h[hit], 0.0)
                ids = idx[hit]
                tau[ids] = s0[hit] + theta
                alive[ids] = False
            xi[idx] = y1

        # points already on the inflow boundary exit immediately
        at_inlet = (x <= 0.0) & (t > ts[0])
        tau[at_inlet] = t[at_inlet]
        alive[at_inlet] = False

        # partial first step from t down to the node at or below it
        hp = t - ts[j]
        idx = np.nonzero((hp > 0) & alive)[0]
        if idx.size:
            step(idx, t[idx], hp[idx])
        rows = np.nonzero(alive)[0]
        P[j[rows], rows] = xi[rows]

        for k in range(int(j.max()) if n else 0, 0, -1):
            idx = np.nonzero(alive & (j >= k))[0]
            if idx.size == 0:
                continue
            step(idx, np.full(idx.size, ts[k]), np.full(idx.size, ts[k] - ts[k - 1]))
            ok = idx[alive[idx]]
            P[k - 1, ok] = xi[ok]

        initial = alive.copy()
        beta = np.where(initial, xi, np.nan)
        return Paths(zone, ts, t, x, P, initial, beta, tau)

    def trace_foot(self, zone: str, t: float, x: float) -> Foot:
        p = self.trace(zone, t, x)
        if p.initial[0]:
            return InitialFoot(float(p.beta[0]))
        return BoundaryFoot(float(p.tau[0]))

    # ---- closed form through (t, 1), PFZ only -----------------------------

    def xi_at_unit_start(self, s: float, t: float) -> float:
        """Closed-form xi(s; t, 1) for the PFZ field."""
        ts = self.traj.times
        if s < ts[0] - 1e-12 or t > ts[-1] + 1e-12 or s > t:
            raise ValueError("require window start <= s <= t <= window end")
        inner = ts[(ts > s) & (ts < t)]
        sig = np.concatenate([[s], inner, [t]]) if t > s else np.array([s])
        if sig.size == 1:
            return 1.0
        a, b = self.coefficients(PFZ, sig)
        q = -b
        G = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(sig) * (q[1:] + q[:-1]))])
        w = a * np.exp(G)
        return float(np.exp(G[-1]) - np.sum(0.5 * np.diff(sig) * (w[1:] + w[:-1])))

    def xi_unit_start_all(self) -> np.ndarray:
        """xi(t0; t_k, 1) for every trajectory node t_k (t0 = window start)."""
        ts = self.traj.times
        a, b = self.coefficients(PFZ, ts)
        q = -b
        dt = np.diff(ts)
        G = np.concatenate([[0.0], np.cumsum(0.5 * dt * (q[1:] + q[:-1]))])
        w = a * np.exp(G)
        I = np.concatenate([[0.0], np.cumsum(0.5 * dt * (w[1:] + w[:-1]))])
        return np.exp(G) - I

    # ---- separatrix ------------------------------------------------------

    def separatrix(self, t: float, zone: str = PFZ) -> float:
        """xi(t; t0, 0): forward characteristic from the window's corner."""
        ts = self.traj.times
        y = 0.0
        for k in range(ts.size - 1):
            if ts[k] >= t:
                break
            h = min(ts[k + 1], t) - ts[k]
            y = float(self._rk4(zone, ts[k], np.array(y), h))
        return y

    def crossing_time(self, zone: str = PFZ):
        """Time at which the corner characteristic reaches x = 1, or None beyond the window."""
        ts = self.traj.times
        y = 0.0
        for k in range(ts.size - 1):
            h = ts[k + 1] - ts[k]
            y1 = float(self._rk4(zone, ts[k], np.array(y), h))
            if y1 >= 1.0:
                theta = self._bisect(zone, np.array([ts[k]]), np.array([y]), np.array([h]), 1.0)
                return float(ts[k] + theta[0])
            y = y1
        return None

    # ---- analytic foot derivatives ----------------------------------------

    def foot_derivatives(self, zone: str, t, x, paths: "Paths | None" = None):
        """Partials of the foot with respect to (t, x).

        Returns ``(initial, d_dt, d_dx)`` arrays: for initial feet the partials
        of beta, for boundary feet the partials of tau.
        """
        if paths is None:
            paths = self.trace(zone, t, x)
        t, x = paths.t, paths.x
        s_f = paths.foot_time
        E = self.stretch(zone, s_f, t)
        a_t, b_t = self.coefficients(zone, t)
        v = a_t + b_t * x
        a_f, _ = self.coefficients(zone, s_f)
        inv_inflow = 1.0 / a_f  # 1 / alpha(tau, 0)
        d_dx = np.where(paths.initial, E, -inv_inflow * E)
        d_dt = np.where(paths.initial, -v * E, v * inv_inflow * E)
        return paths.initial, d_dt, d_dx


@dataclass
class Paths:
    """Backward characteristics from a batch of points.

    ``xi[k, i]`` is the position at node k of point i's curve (NaN where the
    curve does not exist); initial feet have ``beta``, boundary feet ``tau``.
    """

    zone: str
    nodes: np.ndarray
    t: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    initial: np.ndarray
    beta: np.ndarray
    tau: np.ndarray

    @property
    def foot_time(self):
        return np.where(self.initial, self.nodes[0], self.tau)

    @property
    def foot_x(self):
        return np.where(self.initial, self.beta, 0.0)

    def integrate_decay(self, source: Callable[[np.ndarray, np.ndarray], np.ndarray],
                        c: float) -> np.ndarray:
        """int_foot^t exp(c (t - sigma)) q(sigma, xi(sigma)) dsigma, q linear between nodes.

        The exponential weight is integrated exactly, so constant sources are exact.
        """
        s_f = self.foot_time
        x_f = self.foot_x
        ts = self.nodes[:, None]
        sig_nodes = np.clip(ts, s_f[None, :], self.t[None, :])
        xi_nodes = np.where(ts < s_f[None, :], x_f[None, :],
                            np.where(ts > self.t[None, :], self.x[None, :], self.xi))
        xi_nodes = np.where(np.isnan(xi_nodes), x_f[None, :], xi_nodes)
        sig = np.vstack([s_f[None, :], sig_nodes, self.t[None, :]])
        xs = np.vstack([x_f[None, :], xi_nodes, self.x[None, :]])
        q = source(sig, xs)
        d = np.diff(sig, axis=0)
        decay = np.exp(c * (self.t[None, :] - sig[1:]))
        I0 = np.expm1(c * d) / c
        safe = np.where(d > 0, d, 1.0)
        # int_0^d u e^{cu} du / d
        I1d = np.where(d > 0, (np.exp(c * d) - I0 / safe) / c, 0.0)
        qa, qb = q[:-1], q[1:]
        return np.sum(decay * (qb * I0 + (qa - qb) * I1d), axis=0)
