"""Benchmark problems with analytic Jacobians and second-derivative tensors.

ZDT1-4 (bi-objective), DTLZ1-7 (three objectives) and a quadratic toy
problem.  Every problem exposes

* ``evaluate(X)`` vectorised over leading axes, returning (..., k),
* ``jacobian(x)`` of shape (k, n) and ``hessian_tensor(x)`` of shape (k, n, n),
* ``front_sample(count)``: a deterministic discretisation of the Pareto front,
* box bounds, also exposed as ``2n`` linear inequality constraints.

ZDT5 and ZDT6 are deliberately absent (discrete / non-Lipschitz gradient).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.stats import qmc

# first-variable floor used by the Newton phase where d/dx sqrt(x) blows up
ZDT_SQRT_FLOOR = 1e-6
DTLZ6_FLOOR = 1e-10


@dataclass(frozen=True)
class Constraint:
    """Vector constraint ``c(x)`` with Jacobian (p, n) and Hessians (p, n, n)."""

    fun: Callable[[np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    size: int
    linear: bool = False


def box_constraint(lower: np.ndarray, upper: np.ndarray) -> Constraint:
    """``g(x) = (lower - x, x - upper) <= 0``; indices 0..n-1 are lower faces."""
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    n = len(lower)
    J = np.vstack([-np.eye(n), np.eye(n)])
    zeros = np.zeros((2 * n, n, n))
    return Constraint(
        fun=lambda x: np.concatenate([lower - x, x - upper]),
        jac=lambda x: J,
        hess=lambda x: zeros,
        size=2 * n,
        linear=True,
    )


class Problem:
    name: str = ""
    k: int = 2

    def __init__(self, n: int, lower, upper, newton_lower=None, newton_upper=None):
        self.n = int(n)
        self.lower = np.broadcast_to(np.asarray(lower, float), (self.n,)).copy()
        self.upper = np.broadcast_to(np.asarray(upper, float), (self.n,)).copy()
        if not np.all(self.lower < self.upper):
            raise ValueError("lower bounds must be strictly below upper bounds")
        # box the Newton phase works in; differs from the true box only where
        # derivatives are singular on the boundary
        self.newton_lower = self.lower.copy() if newton_lower is None else np.asarray(newton_lower, float)
        self.newton_upper = self.upper.copy() if newton_upper is None else np.asarray(newton_upper, float)
        self.equality_constraints: Optional[Constraint] = None
        self.inequality_constraints: Optional[Constraint] = box_constraint(self.newton_lower, self.newton_upper)

    def evaluate(self, X) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian_tensor(self, x) -> np.ndarray:
        raise NotImplementedError

    def front_sample(self, count: int) -> np.ndarray:
        raise NotImplementedError

    def random_interior(self, rng: np.random.Generator, size: Optional[int] = None, margin: float = 0.05):
        lo, hi = self.newton_lower, self.newton_upper
        span = hi - lo
        shape = (self.n,) if size is None else (size, self.n)
        return lo + span * (margin + (1 - 2 * margin) * rng.random(shape))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, k={self.k})"


# ---------------------------------------------------------------------------
# front sampling helpers


def _arclength_points(curve: Callable[[np.ndarray], np.ndarray], t0: float, t1: float, count: int,
                      grid: int = 4001) -> np.ndarray:
    if count == 1:
        return curve(np.array([0.5 * (t0 + t1)]))
    t = np.linspace(t0, t1, grid)
    pts = curve(t)
    s = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
    t_new = np.interp(np.linspace(0.0, s[-1], count), s, t)
    return curve(t_new)


def _curve_length(curve, t0, t1, grid: int = 4001) -> float:
    pts = curve(np.linspace(t0, t1, grid))
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


def _allocate(count: int, weights) -> np.ndarray:
    """Largest-remainder split of ``count`` proportional to ``weights``."""
    w = np.asarray(weights, float)
    raw = count * w / w.sum()
    out = np.floor(raw).astype(int)
    order = np.argsort(-(raw - out), kind="stable")
    out[order[: count - out.sum()]] += 1
    return out


def _halton(count: int, d: int = 2) -> np.ndarray:
    return qmc.Halton(d=d, scramble=False).random(count)


# ---------------------------------------------------------------------------
# ZDT


class _ZDT(Problem):
    k = 2
    _sqrt_form = True  # f2 = g - sqrt(x1 g); otherwise f2 = g - x1^2/g

    def __init__(self, n: int = 30, lower=0.0, upper=1.0):
        newton_lower = np.broadcast_to(np.asarray(lower, float), (n,)).copy()
        if self._sqrt_form:
            newton_lower[0] = max(newton_lower[0], ZDT_SQRT_FLOOR)
        super().__init__(n, lower, upper, newton_lower=newton_lower)

    # g(z) over the tail variables and its derivatives
    def _g(self, z):
        return 1.0 + 9.0 * np.sum(z, axis=-1) / (self.n - 1)

    def _dg(self, z):
        return np.full(z.shape, 9.0 / (self.n - 1))

    def _d2g(self, z):
        return np.zeros((len(z), len(z)))

    # additive x1-only term (ZDT3)
    def _extra(self, x1):
        return 0.0 * x1, 0.0 * x1, 0.0 * x1

    def evaluate(self, X):
        X = np.asarray(X, float)
        x1, z = X[..., 0], X[..., 1:]
        g = self._g(z)
        if self._sqrt_form:
            f2 = g - np.sqrt(np.maximum(x1, 0.0) * g)
        else:
            f2 = g - x1**2 / g
        f2 = f2 + self._extra(x1)[0]
        return np.stack([x1, f2], axis=-1)

    def _f2_partials(self, x1, g):
        """(f_x1, f_g, f_x1x1, f_x1g, f_gg) of f2 seen as a function of (x1, g)."""
        if self._sqrt_form:
            sx, sg = np.sqrt(x1), np.sqrt(g)
            return (-0.5 * sg / sx, 1.0 - 0.5 * sx / sg, 0.25 * sg / x1**1.5, -0.25 / (sx * sg), 0.25 * sx / g**1.5)
        return (-2.0 * x1 / g, 1.0 + x1**2 / g**2, -2.0 / g, 2.0 * x1 / g**2, -2.0 * x1**2 / g**3)

    def jacobian(self, x):
        x = np.asarray(x, float)
        x1, z = x[0], x[1:]
        g, dg = self._g(z), self._dg(z)
        f_x1, f_g, *_ = self._f2_partials(x1, g)
        J = np.zeros((2, self.n))
        J[0, 0] = 1.0
        J[1, 0] = f_x1 + self._extra(x1)[1]
        J[1, 1:] = f_g * dg
        return J

    def hessian_tensor(self, x):
        x = np.asarray(x, float)
        x1, z = x[0], x[1:]
        g, dg, d2g = self._g(z), self._dg(z), self._d2g(z)
        _, f_g, f_11, f_1g, f_gg = self._f2_partials(x1, g)
        H = np.zeros((2, self.n, self.n))
        H[1, 0, 0] = f_11 + self._extra(x1)[2]
        H[1, 0, 1:] = H[1, 1:, 0] = f_1g * dg
        H[1, 1:, 1:] = f_gg * np.outer(dg, dg) + f_g * d2g
        return H


class ZDT1(_ZDT):
    name = "zdt1"

    def front_sample(self, count):
        t = np.linspace(0.0, 1.0, count)
        return np.c_[t**2, 1.0 - t]


class ZDT2(_ZDT):
    name = "zdt2"
    _sqrt_form = False

    def front_sample(self, count):
        t = np.linspace(0.0, 1.0, count)
        return np.c_[t, 1.0 - t**2]


class ZDT3(_ZDT):
    name = "zdt3"
    # approximate f1 intervals on which the ZDT3 front is nondominated;
    # refined to machine precision by _segments()
    SEGMENTS = (
        (0.0, 0.0830015349),
        (0.1822287280, 0.2577623634),
        (0.4093136748, 0.4538821041),
        (0.6183967944, 0.6525117038),
        (0.8233317983, 0.8518328654),
    )

    @classmethod
    def _segments(cls):
        """Segment ends at the local minima of f2, starts where f2 first drops below the previous end."""
        f2 = lambda t: 1.0 - np.sqrt(t) - t * np.sin(10 * np.pi * t)
        df2 = lambda t: -0.5 / np.sqrt(t) - np.sin(10 * np.pi * t) - 10 * np.pi * t * np.cos(10 * np.pi * t)
        out, prev = [], None
        for a, b in cls.SEGMENTS:
            b = brentq(df2, b - 0.01, b + 0.01, xtol=1e-15)
            if prev is not None:
                level = f2(prev) - 1e-12
                a = brentq(lambda t: f2(t) - level, a - 0.01, a + 0.01, xtol=1e-15)
            out.append((a, b))
            prev = b
        return tuple(out)

    def _extra(self, x1):
        a = 10 * np.pi
        return (-x1 * np.sin(a * x1),
                -np.sin(a * x1) - a * x1 * np.cos(a * x1),
                -2 * a * np.cos(a * x1) + a * a * x1 * np.sin(a * x1))

    @staticmethod
    def _curve(t):
        return np.c_[t, 1.0 - np.sqrt(t) - t * np.sin(10 * np.pi * t)]

    def front_sample(self, count):
        segments = self._segments()
        lengths = [_curve_length(self._curve, a, b) for a, b in segments]
        alloc = _allocate(count, lengths)
        parts = [_arclength_points(self._curve, a, b, c) for (a, b), c in zip(segments, alloc) if c > 0]
        return np.vstack(parts)


class ZDT4(_ZDT):
    name = "zdt4"

    def __init__(self, n: int = 10):
        super().__init__(n, lower=np.r_[0.0, np.full(n - 1, -5.0)], upper=np.r_[1.0, np.full(n - 1, 5.0)])

    def _g(self, z):
        return 1.0 + 10.0 * (self.n - 1) + np.sum(z**2 - 10.0 * np.cos(4 * np.pi * z), axis=-1)

    def _dg(self, z):
        return 2.0 * z + 40.0 * np.pi * np.sin(4 * np.pi * z)

    def _d2g(self, z):
        return np.diag(2.0 + 160.0 * np.pi**2 * np.cos(4 * np.pi * z))

    def front_sample(self, count):
        t = np.linspace(0.0, 1.0, count)
        return np.c_[t**2, 1.0 - t]


# ---------------------------------------------------------------------------
# DTLZ
#
# f_i = c * (1 + g) * prod_j a_ij(phi_j) with position "angles" phi(x); the
# chain rule below is shared by DTLZ1-6.


_TRIG = {
    "A": (np.cos, lambda p: -np.sin(p), lambda p: -np.cos(p)),
    "B": (np.sin, np.cos, lambda p: -np.sin(p)),
}
_LINEAR = {
    "A": (lambda p: p, lambda p: np.ones_like(p), lambda p: np.zeros_like(p)),
    "B": (lambda p: 1.0 - p, lambda p: -np.ones_like(p), lambda p: np.zeros_like(p)),
}


class _DTLZ(Problem):
    k = 3
    n_distance = 10
    scale = 1.0
    factors = _TRIG

    def __init__(self, n: Optional[int] = None, newton_lower=None):
        n = self.k - 1 + self.n_distance if n is None else int(n)
        if n < self.k:
            raise ValueError(f"{self.name} needs n >= {self.k}")
        super().__init__(n, 0.0, 1.0, newton_lower=newton_lower)

    # distance function over z = x[k-1:]
    def _g(self, z):
        return np.sum((z - 0.5) ** 2, axis=-1)

    def _dg(self, z):
        return 2.0 * (z - 0.5)

    def _d2g(self, z):
        return 2.0 * np.ones_like(z)  # diagonal

    def _angles(self, X, g):
        return 0.5 * np.pi * X[..., : self.k - 1]

    def _angle_derivatives(self, x, g, dg_full, d2g_full):
        """Jacobian (k-1, n) and Hessians (k-1, n, n) of the angles at one point."""
        m = self.k - 1
        J = np.zeros((m, self.n))
        J[np.arange(m), np.arange(m)] = 0.5 * np.pi
        return J, np.zeros((m, self.n, self.n))

    def _pattern(self, i):
        """Factor codes for objective i over the k-1 angles ('A', 'B' or None)."""
        m = self.k - 1
        codes = [None] * m
        for j in range(m - i):
            codes[j] = "A"
        if i > 0:
            codes[m - i] = "B"
        return codes

    def evaluate(self, X):
        X = np.asarray(X, float)
        z = X[..., self.k - 1:]
        g = self._g(z)
        phi = self._angles(X, g)
        out = []
        for i in range(self.k):
            val = self.scale * (1.0 + g)
            for j, code in enumerate(self._pattern(i)):
                if code is not None:
                    val = val * self.factors[code][0](phi[..., j])
            out.append(val)
        return np.stack(out, axis=-1)

    def _full_g(self, x):
        m = self.k - 1
        z = x[m:]
        g = self._g(z)
        dg = np.zeros(self.n)
        dg[m:] = self._dg(z)
        d2g = np.zeros((self.n, self.n))
        d2g[m:, m:] = np.diag(self._d2g(z))
        return g, dg, d2g

    def _product_derivatives(self, i, phi):
        codes = self._pattern(i)
        m = len(codes)
        v = np.ones(m)
        d = np.zeros(m)
        s = np.zeros(m)
        for j, code in enumerate(codes):
            if code is not None:
                f, df, d2f = self.factors[code]
                v[j], d[j], s[j] = f(phi[j]), df(phi[j]), d2f(phi[j])
        P = np.prod(v)
        dP = np.array([d[j] * np.prod(np.delete(v, j)) for j in range(m)])
        d2P = np.zeros((m, m))
        for j in range(m):
            for l in range(m):
                if j == l:
                    d2P[j, j] = s[j] * np.prod(np.delete(v, j))
                else:
                    d2P[j, l] = d[j] * d[l] * np.prod(np.delete(v, [j, l]))
        return P, dP, d2P

    def _derivatives(self, x, order):
        x = np.asarray(x, float)
        g, dg, d2g = self._full_g(x)
        phi = self._angles(x, g)
        Jphi, Hphi = self._angle_derivatives(x, g, dg, d2g)
        u = 1.0 + g
        J = np.zeros((self.k, self.n))
        H = np.zeros((self.k, self.n, self.n)) if order == 2 else None
        for i in range(self.k):
            P, dP, d2P = self._product_derivatives(i, phi)
            gradP = Jphi.T @ dP
            J[i] = self.scale * (P * dg + u * gradP)
            if order == 2:
                hessP = Jphi.T @ d2P @ Jphi + np.einsum("j,jab->ab", dP, Hphi)
                H[i] = self.scale * (P * d2g + np.outer(dg, gradP) + np.outer(gradP, dg) + u * hessP)
        return J if order == 1 else H

    def jacobian(self, x):
        return self._derivatives(x, 1)

    def hessian_tensor(self, x):
        return self._derivatives(x, 2)

    def front_sample(self, count):
        # uniform on the unit-sphere octant (Archimedes' projection)
        u = _halton(count)
        z = u[:, 0]
        a = 0.5 * np.pi * u[:, 1]
        rho = np.sqrt(1.0 - z**2)
        return np.c_[rho * np.cos(a), rho * np.sin(a), z]


class DTLZ1(_DTLZ):
    name = "dtlz1"
    n_distance = 5
    scale = 0.5
    factors = _LINEAR

    def _g(self, z):
        w = z - 0.5
        return 100.0 * (z.shape[-1] + np.sum(w**2 - np.cos(20 * np.pi * w), axis=-1))

    def _dg(self, z):
        w = z - 0.5
        return 100.0 * (2.0 * w + 20 * np.pi * np.sin(20 * np.pi * w))

    def _d2g(self, z):
        w = z - 0.5
        return 100.0 * (2.0 + 400 * np.pi**2 * np.cos(20 * np.pi * w))

    def _angles(self, X, g):
        return X[..., : self.k - 1]

    def _angle_derivatives(self, x, g, dg_full, d2g_full):
        m = self.k - 1
        J = np.zeros((m, self.n))
        J[np.arange(m), np.arange(m)] = 1.0
        return J, np.zeros((m, self.n, self.n))

    def front_sample(self, count):
        u = _halton(count)
        flip = u.sum(axis=1) > 1.0
        u[flip] = 1.0 - u[flip]
        return 0.5 * np.c_[u[:, 0], u[:, 1], 1.0 - u.sum(axis=1)]


class DTLZ2(_DTLZ):
    name = "dtlz2"


class DTLZ3(_DTLZ):
    name = "dtlz3"
    _g = DTLZ1._g
    _dg = DTLZ1._dg
    _d2g = DTLZ1._d2g


class DTLZ4(_DTLZ):
    name = "dtlz4"
    alpha = 100.0

    def _angles(self, X, g):
        return 0.5 * np.pi * X[..., : self.k - 1] ** self.alpha

    def _angle_derivatives(self, x, g, dg_full, d2g_full):
        m, a = self.k - 1, self.alpha
        xs = x[:m]
        J = np.zeros((m, self.n))
        H = np.zeros((m, self.n, self.n))
        for j in range(m):
            J[j, j] = 0.5 * np.pi * a * xs[j] ** (a - 1)
            H[j, j, j] = 0.5 * np.pi * a * (a - 1) * xs[j] ** (a - 2)
        return J, H


class DTLZ5(_DTLZ):
    name = "dtlz5"

    def _angles(self, X, g):
        m = self.k - 1
        u = (1.0 + g)[..., None]
        first = 0.5 * np.pi * X[..., :1]
        rest = 0.25 * np.pi * (1.0 + 2.0 * g[..., None] * X[..., 1:m]) / u
        return np.concatenate([first, rest], axis=-1)

    def _angle_derivatives(self, x, g, dg, d2g):
        m = self.k - 1
        u = 1.0 + g
        J = np.zeros((m, self.n))
        H = np.zeros((m, self.n, self.n))
        J[0, 0] = 0.5 * np.pi
        c = 0.25 * np.pi
        for j in range(1, m):
            q = (2.0 * x[j] - 1.0) / u**2  # d w / d g
            J[j] = c * q * dg
            J[j, j] += c * 2.0 * g / u
            Hj = c * (2.0 * x[j] - 1.0) * (-2.0 / u**3 * np.outer(dg, dg) + d2g / u**2)
            cross = c * 2.0 * dg / u**2
            Hj[j, :] += cross
            Hj[:, j] += cross
            H[j] = Hj
        return J, H

    def front_sample(self, count):
        t = np.linspace(0.0, 0.5 * np.pi, count)
        c = np.cos(t) / np.sqrt(2.0)
        return np.c_[c, c, np.sin(t)]


class DTLZ6(DTLZ5):
    name = "dtlz6"

    def __init__(self, n: Optional[int] = None):
        n = self.k - 1 + self.n_distance if n is None else int(n)
        newton_lower = np.zeros(n)
        newton_lower[self.k - 1:] = DTLZ6_FLOOR
        super().__init__(n, newton_lower=newton_lower)

    def _g(self, z):
        return np.sum(np.maximum(z, 0.0) ** 0.1, axis=-1)

    def _dg(self, z):
        return 0.1 * z**-0.9

    def _d2g(self, z):
        return -0.09 * z**-1.9


class DTLZ7(Problem):
    name = "dtlz7"
    k = 3
    # f_i intervals on which the DTLZ7 front is nondominated
    REGIONS = ((0.0, 0.2514118360), (0.6316265307, 0.8594008566))

    def __init__(self, n: Optional[int] = None):
        n = self.k - 1 + 20 if n is None else int(n)
        super().__init__(n, 0.0, 1.0)

    def _h_terms(self, p):
        a = 3 * np.pi
        return p * (1.0 + np.sin(a * p))

    def evaluate(self, X):
        X = np.asarray(X, float)
        m = self.k - 1
        p, z = X[..., :m], X[..., m:]
        g = 1.0 + 9.0 * np.mean(z, axis=-1)
        last = (1.0 + g) * self.k - np.sum(self._h_terms(p), axis=-1)
        return np.concatenate([p, last[..., None]], axis=-1)

    def jacobian(self, x):
        x = np.asarray(x, float)
        m, a = self.k - 1, 3 * np.pi
        p = x[:m]
        J = np.zeros((self.k, self.n))
        J[np.arange(m), np.arange(m)] = 1.0
        J[m, :m] = -(1.0 + np.sin(a * p) + a * p * np.cos(a * p))
        J[m, m:] = self.k * 9.0 / (self.n - m)
        return J

    def hessian_tensor(self, x):
        x = np.asarray(x, float)
        m, a = self.k - 1, 3 * np.pi
        p = x[:m]
        H = np.zeros((self.k, self.n, self.n))
        H[m, np.arange(m), np.arange(m)] = -(2 * a * np.cos(a * p) - a * a * p * np.sin(a * p))
        return H

    def _surface(self, uv):
        return np.c_[uv, 2.0 * self.k - np.sum(self._h_terms(uv), axis=1)]

    def front_sample(self, count):
        boxes = [(r1, r2) for r1 in self.REGIONS for r2 in self.REGIONS]
        # surface area of each patch by midpoint quadrature
        areas = []
        for (a1, b1), (a2, b2) in boxes:
            s = (np.arange(64) + 0.5) / 64
            U = np.stack(np.meshgrid(a1 + (b1 - a1) * s, a2 + (b2 - a2) * s), -1).reshape(-1, 2)
            grad = -(1.0 + np.sin(3 * np.pi * U) + 3 * np.pi * U * np.cos(3 * np.pi * U))
            areas.append(np.mean(np.sqrt(1.0 + np.sum(grad**2, axis=1))) * (b1 - a1) * (b2 - a2))
        parts = []
        for ((a1, b1), (a2, b2)), c in zip(boxes, _allocate(count, areas)):
            if c == 0:
                continue
            u = _halton(c)
            parts.append(self._surface(np.c_[a1 + (b1 - a1) * u[:, 0], a2 + (b2 - a2) * u[:, 1]]))
        return np.vstack(parts)


class ToyBiObjective(Problem):
    """Two shifted paraboloids; efficient set is the segment x1 = x2 in [-1, 1]."""

    name = "toy-biobj"
    k = 2

    def __init__(self, n: int = 2):
        if n != 2:
            raise ValueError("toy-biobj is defined for n = 2 only")
        super().__init__(2, -2.0, 2.0)

    def evaluate(self, X):
        X = np.asarray(X, float)
        return np.stack([np.sum((X - 1.0) ** 2, axis=-1), np.sum((X + 1.0) ** 2, axis=-1)], axis=-1)

    def jacobian(self, x):
        x = np.asarray(x, float)
        return np.vstack([2.0 * (x - 1.0), 2.0 * (x + 1.0)])

    def hessian_tensor(self, x):
        return np.stack([2.0 * np.eye(2), 2.0 * np.eye(2)])

    @staticmethod
    def _curve(t):
        return np.c_[2.0 * (t - 1.0) ** 2, 2.0 * (t + 1.0) ** 2]

    def front_sample(self, count):
        return _arclength_points(self._curve, 1.0, -1.0, count)


PROBLEMS: dict[str, type] = {
    cls.name: cls
    for cls in (ZDT1, ZDT2, ZDT3, ZDT4, DTLZ1, DTLZ2, DTLZ3, DTLZ4, DTLZ5, DTLZ6, DTLZ7, ToyBiObjective)
}


class UnknownProblemError(KeyError):
    def __str__(self):
        return f"unknown problem {self.args[0]!r}; available: {', '.join(PROBLEMS)}"


def make_problem(name: str, n: Optional[int] = None) -> Problem:
    try:
        cls = PROBLEMS[name.lower()]
    except KeyError:
        raise UnknownProblemError(name) from None
    return cls() if n is None else cls(n)


def front_sample(problem: Problem, count: int) -> np.ndarray:
    if count < 2:
        raise ValueError("front_sample needs count >= 2")
    return problem.front_sample(int(count))


@dataclass
class DerivativeReport:
    jacobian_error: float
    hessian_error: float

    def ok(self, jac_tol: float = 1e-5, hess_tol: float = 1e-4) -> bool:
        return self.jacobian_error <= jac_tol and self.hessian_error <= hess_tol


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


def check_derivatives(problem: Problem, x, step: float = 1e-6) -> DerivativeReport:
    """Compare analytic derivatives with central differences.

    Errors are ``max|analytic - fd| / max(1, max|fd|)``: relative for large
    entries, absolute near zero.
    """
    x = np.asarray(x, float)
    n = problem.n
    J = problem.jacobian(x)
    H = problem.hessian_tensor(x)
    J_fd = np.zeros_like(J)
    H_fd = np.zeros_like(H)
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        J_fd[:, j] = (problem.evaluate(x + e) - problem.evaluate(x - e)) / (2 * step)
        H_fd[:, :, j] = (problem.jacobian(x + e) - problem.jacobian(x - e)) / (2 * step)
    return DerivativeReport(_rel(J, J_fd), _rel(H, H_fd))
