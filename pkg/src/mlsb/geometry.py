"""Strictly convex obstacles, arclength charts and the non-eclipse check.

Every obstacle is a closed curve gamma(t), t in [0, 2*pi), traversed
counterclockwise. Arclength s is measured from t = 0 in the same direction, so
s-values are a convention; only differences and lengths are physical.
"""
from __future__ import annotations

import bisect
import hashlib
import json
import math
from functools import lru_cache
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import mpmath as mp
import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConvexityError, DataIOError, EclipseViolation, TableError
from .numeric import DEFAULT_PREC, GUARD, check_prec, param_key, real

TWO_PI = 2 * math.pi
CONVEXITY_SAMPLES = 4096


@lru_cache(maxsize=4096)
def _flt_cached(v) -> float:
    with mp.workprec(64):
        return float(real(v))


def _flt(v) -> float:
    return _flt_cached(v) if isinstance(v, (int, float, str)) else float(real(v))


class ConvexObstacle:
    """Base class. Subclasses provide `_frame` (mp) and `_frame_np` (float64)."""

    kind = "abstract"

    def __init__(self, center):
        if len(center) != 2:
            raise TableError("center must have two coordinates")
        self._center = tuple(center)
        self._pcache: dict = {}
        self._arc: dict = {}

    # -- parameters -----------------------------------------------------
    def _params(self):
        key = mp.mp.prec
        p = self._pcache.get(key)
        if p is None:
            p = self._pcache[key] = self._make_params()
        return p

    def _make_params(self):
        raise NotImplementedError

    @property
    def center(self):
        return real(self._center[0]), real(self._center[1])

    @property
    def center_f(self) -> np.ndarray:
        return np.array([_flt(c) for c in self._center])

    def to_json(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_json()})"

    def __eq__(self, other):
        return isinstance(other, ConvexObstacle) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(json.dumps(self.to_json(), sort_keys=True))

    # -- native parametrization ------------------------------------------
    def frame(self, t):
        """(x, y, x', y', x'', y'') at native parameter t, current mp precision."""
        return self._frame(t)

    def frame_np(self, t):
        return self._frame_np(np.asarray(t, dtype=float))

    def speed(self, t):
        f = self._frame(t)
        return mp.sqrt(f[2] ** 2 + f[3] ** 2)

    def curvature_t(self, t):
        x, y, dx, dy, ddx, ddy = self._frame(t)
        return (dx * ddy - dy * ddx) / (dx * dx + dy * dy) ** mp.mpf(1.5)

    def curvature_np(self, t):
        x, y, dx, dy, ddx, ddy = self._frame_np(t)
        return (dx * ddy - dy * ddx) / (dx * dx + dy * dy) ** 1.5

    def support_np(self, u: np.ndarray) -> np.ndarray:
        """max over the obstacle of <p, u> for unit vectors u (shape (n, 2))."""
        ts = np.linspace(0.0, TWO_PI, 512, endpoint=False)
        x, y, *_ = self._frame_np(ts)
        k = np.argmax(u[:, :1] * x[None, :] + u[:, 1:] * y[None, :], axis=1)
        t = ts[k]
        for _ in range(8):
            x, y, dx, dy, ddx, ddy = self._frame_np(t)
            g = dx * u[:, 0] + dy * u[:, 1]
            dg = ddx * u[:, 0] + ddy * u[:, 1]
            t = t - g / np.where(dg == 0, -1.0, dg)
        x, y, *_ = self._frame_np(t)
        return x * u[:, 0] + y * u[:, 1]

    def inside_np(self, x, y) -> np.ndarray:
        """Boolean mask of points strictly inside the obstacle."""
        raise NotImplementedError

    # -- arclength --------------------------------------------------------
    def _arc_table(self, prec: int) -> "_ArcTable":
        tab = self._arc.get(prec)
        if tab is None:
            tab = self._arc[prec] = _ArcTable(self, prec)
        return tab

    def total_length(self, prec: int = DEFAULT_PREC):
        return self._arc_table(check_prec(prec)).length

    def s_of_t(self, t, prec: int = DEFAULT_PREC):
        return self._arc_table(check_prec(prec)).s_of_t(t)

    def t_of_s(self, s, prec: int = DEFAULT_PREC):
        return self._arc_table(check_prec(prec)).t_of_s(s)


class _ArcTable:
    """Cumulative arclength at fixed knots, Gauss-Legendre panels in between."""

    KNOTS = 32

    def __init__(self, ob: ConvexObstacle, prec: int):
        self.ob = ob
        self.prec = prec
        with mp.workprec(prec + GUARD):
            self.knots = [2 * mp.pi * k / self.KNOTS for k in range(self.KNOTS + 1)]
            cum = [mp.mpf(0)]
            for a, b in zip(self.knots[:-1], self.knots[1:]):
                cum.append(cum[-1] + self._quad(a, b))
            self.cum = cum
            self.length = cum[-1]

    def _quad(self, a, b):
        if a == b:
            return mp.mpf(0)
        return mp.quad(self.ob.speed, [a, b], method="gauss-legendre")

    def s_of_t(self, t):
        with mp.workprec(self.prec + GUARD):
            t = mp.mpf(t)
            n = mp.floor(t / (2 * mp.pi))
            r = t - n * 2 * mp.pi
            k = min(int(r / (2 * mp.pi) * self.KNOTS), self.KNOTS - 1)
            return n * self.length + self.cum[k] + self._quad(self.knots[k], r)

    def t_of_s(self, s):
        with mp.workprec(self.prec + GUARD):
            s = mp.mpf(s)
            n = mp.floor(s / self.length)
            r = s - n * self.length
            k = min(max(bisect.bisect_right(self.cum, r) - 1, 0), self.KNOTS - 1)
            a, b = self.knots[k], self.knots[k + 1]
            t = a + (b - a) * (r - self.cum[k]) / (self.cum[k + 1] - self.cum[k])
            tol = mp.mpf(2) ** (-(self.prec + GUARD // 2))
            for _ in range(100):
                # s(t) is strictly increasing: Newton with a bracketing guard
                f = self.cum[k] + self._quad(a, t) - r
                step = f / self.ob.speed(t)
                t_new = t - step
                if not (a - (b - a) <= t_new <= b + (b - a)):
                    t_new = (a + b) / 2
                t = t_new
                if abs(step) < tol:
                    break
            return t + n * 2 * mp.pi


class Circle(ConvexObstacle):
    kind = "circle"

    def __init__(self, center, radius):
        super().__init__(center)
        self._radius = radius
        if _flt(radius) <= 0:
            raise TableError("circle radius must be positive")

    def _make_params(self):
        return real(self._center[0]), real(self._center[1]), real(self._radius)

    @property
    def radius(self):
        return self._params()[2]

    def to_json(self):
        return {"kind": "circle", "center": [param_key(c) for c in self._center],
                "radius": param_key(self._radius)}

    def _frame(self, t):
        cx, cy, r = self._params()
        c, s = mp.cos(t), mp.sin(t)
        return cx + r * c, cy + r * s, -r * s, r * c, -r * c, -r * s

    def _frame_np(self, t):
        cx, cy = self.center_f
        r = _flt(self._radius)
        c, s = np.cos(t), np.sin(t)
        return cx + r * c, cy + r * s, -r * s, r * c, -r * c, -r * s

    def support_np(self, u):
        return u @ self.center_f + _flt(self._radius)

    def inside_np(self, x, y):
        cx, cy = self.center_f
        return np.hypot(x - cx, y - cy) < _flt(self._radius)

    def total_length(self, prec=DEFAULT_PREC):
        with mp.workprec(check_prec(prec) + GUARD):
            return 2 * mp.pi * self._params()[2]

    def s_of_t(self, t, prec=DEFAULT_PREC):
        with mp.workprec(check_prec(prec) + GUARD):
            return self._params()[2] * t

    def t_of_s(self, s, prec=DEFAULT_PREC):
        with mp.workprec(check_prec(prec) + GUARD):
            return s / self._params()[2]


class Ellipse(ConvexObstacle):
    kind = "ellipse"

    def __init__(self, center, semi_axes, rotation=0):
        super().__init__(center)
        a, b = semi_axes
        self._axes = (a, b)
        self._rotation = rotation
        fa, fb = _flt(a), _flt(b)
        if not fa >= fb > 0:
            raise TableError("ellipse semi-axes must satisfy a >= b > 0")

    def _make_params(self):
        rot = real(self._rotation)
        return (real(self._center[0]), real(self._center[1]), real(self._axes[0]),
                real(self._axes[1]), mp.cos(rot), mp.sin(rot))

    def to_json(self):
        return {"kind": "ellipse", "center": [param_key(c) for c in self._center],
                "semi_axes": [param_key(a) for a in self._axes],
                "rotation": param_key(self._rotation)}

    def _frame(self, t):
        cx, cy, a, b, cr, sr = self._params()
        c, s = mp.cos(t), mp.sin(t)
        ex, ey = a * c, b * s
        dx, dy = -a * s, b * c
        return (cx + cr * ex - sr * ey, cy + sr * ex + cr * ey,
                cr * dx - sr * dy, sr * dx + cr * dy,
                -(cr * ex - sr * ey), -(sr * ex + cr * ey))

    def _fparams(self):
        rot = _flt(self._rotation)
        return (*self.center_f, _flt(self._axes[0]), _flt(self._axes[1]),
                math.cos(rot), math.sin(rot))

    def _frame_np(self, t):
        cx, cy, a, b, cr, sr = self._fparams()
        c, s = np.cos(t), np.sin(t)
        ex, ey = a * c, b * s
        dx, dy = -a * s, b * c
        return (cx + cr * ex - sr * ey, cy + sr * ex + cr * ey,
                cr * dx - sr * dy, sr * dx + cr * dy,
                -(cr * ex - sr * ey), -(sr * ex + cr * ey))

    def support_np(self, u):
        cx, cy, a, b, cr, sr = self._fparams()
        u1 = u[:, 0] * cr + u[:, 1] * sr
        u2 = -u[:, 0] * sr + u[:, 1] * cr
        return u[:, 0] * cx + u[:, 1] * cy + np.sqrt((a * u1) ** 2 + (b * u2) ** 2)

    def inside_np(self, x, y):
        cx, cy, a, b, cr, sr = self._fparams()
        X, Y = x - cx, y - cy
        p = X * cr + Y * sr
        q = -X * sr + Y * cr
        return (p / a) ** 2 + (q / b) ** 2 < 1


class FourierCurve(ConvexObstacle):
    """Radial perturbation r(t) = r0 + sum_k cos[k-1] cos(k t) + sin[k-1] sin(k t)."""

    kind = "fourier"

    def __init__(self, center, base_radius, cos=(), sin=()):
        super().__init__(center)
        self._r0 = base_radius
        n = max(len(cos), len(sin))
        self._cos = tuple(cos) + (0,) * (n - len(cos))
        self._sin = tuple(sin) + (0,) * (n - len(sin))
        self._validate()

    def _make_params(self):
        return (real(self._center[0]), real(self._center[1]), real(self._r0),
                [real(c) for c in self._cos], [real(s) for s in self._sin])

    def to_json(self):
        return {"kind": "fourier", "center": [param_key(c) for c in self._center],
                "base_radius": param_key(self._r0),
                "cos": [param_key(c) for c in self._cos],
                "sin": [param_key(s) for s in self._sin]}

    def _radial(self, t):
        _, _, r0, cs, ss = self._params()
        r, d1, d2 = r0, mp.mpf(0), mp.mpf(0)
        for k, (a, b) in enumerate(zip(cs, ss), start=1):
            c, s = mp.cos(k * t), mp.sin(k * t)
            r += a * c + b * s
            d1 += k * (b * c - a * s)
            d2 -= k * k * (a * c + b * s)
        return r, d1, d2

    def _frame(self, t):
        cx, cy = self._params()[:2]
        r, d1, d2 = self._radial(t)
        c, s = mp.cos(t), mp.sin(t)
        return (cx + r * c, cy + r * s,
                d1 * c - r * s, d1 * s + r * c,
                d2 * c - 2 * d1 * s - r * c, d2 * s + 2 * d1 * c - r * s)

    def _radial_np(self, t):
        r0 = _flt(self._r0)
        r = np.full_like(t, r0)
        d1 = np.zeros_like(t)
        d2 = np.zeros_like(t)
        for k, (a, b) in enumerate(zip(self._cos, self._sin), start=1):
            a, b = _flt(a), _flt(b)
            c, s = np.cos(k * t), np.sin(k * t)
            r = r + a * c + b * s
            d1 = d1 + k * (b * c - a * s)
            d2 = d2 - k * k * (a * c + b * s)
        return r, d1, d2

    def _frame_np(self, t):
        cx, cy = self.center_f
        r, d1, d2 = self._radial_np(t)
        c, s = np.cos(t), np.sin(t)
        return (cx + r * c, cy + r * s,
                d1 * c - r * s, d1 * s + r * c,
                d2 * c - 2 * d1 * s - r * c, d2 * s + 2 * d1 * c - r * s)

    def inside_np(self, x, y):
        cx, cy = self.center_f
        X, Y = x - cx, y - cy
        r, _, _ = self._radial_np(np.arctan2(Y, X))
        return np.hypot(X, Y) < r

    def _validate(self):
        ts = np.linspace(0.0, TWO_PI, CONVEXITY_SAMPLES, endpoint=False)
        r, _, _ = self._radial_np(ts)
        if np.min(r) <= 0:
            raise ConvexityError("radial function must stay positive")
        kap = self.curvature_np(ts)
        # refine around the sampled minimum so that a narrow dip is not missed
        k = int(np.argmin(kap))
        h = TWO_PI / CONVEXITY_SAMPLES
        res = minimize_scalar(lambda t: float(self.curvature_np(np.array([t]))[0]),
                              bounds=(ts[k] - h, ts[k] + h), method="bounded",
                              options={"xatol": 1e-12})
        kmin = min(float(kap[k]), float(res.fun))
        if not kmin > 0:
            raise ConvexityError(f"curve is not strictly convex (min curvature {kmin:.3g})")
        self.min_curvature = kmin


def make_obstacle(d: dict) -> ConvexObstacle:
    kind = d.get("kind")
    try:
        if kind == "circle":
            return Circle(d["center"], d["radius"])
        if kind == "ellipse":
            return Ellipse(d["center"], d["semi_axes"], d.get("rotation", 0))
        if kind == "fourier":
            return FourierCurve(d["center"], d["base_radius"], d.get("cos", []), d.get("sin", []))
    except KeyError as e:
        raise TableError(f"obstacle of kind {kind!r} is missing field {e}") from None
    raise TableError(f"unknown obstacle kind {kind!r}")


# -- arclength-facing operations ---------------------------------------------

def eval_point(obstacle: ConvexObstacle, s, prec: int = DEFAULT_PREC):
    """gamma(s); s is reduced modulo the perimeter."""
    with mp.workprec(check_prec(prec) + GUARD):
        t = obstacle.t_of_s(s, prec)
        x, y = obstacle.frame(t)[:2]
    with mp.workprec(prec):
        return +x, +y


def curvature(obstacle: ConvexObstacle, s, prec: int = DEFAULT_PREC):
    with mp.workprec(check_prec(prec) + GUARD):
        k = obstacle.curvature_t(obstacle.t_of_s(s, prec))
    with mp.workprec(prec):
        return +k


def arclength_param(obstacle: ConvexObstacle, t, prec: int = DEFAULT_PREC):
    """Native parameter -> arclength."""
    s = obstacle.s_of_t(t, prec)
    with mp.workprec(prec):
        return +s


def arclength_inverse(obstacle: ConvexObstacle, s, prec: int = DEFAULT_PREC):
    """Arclength -> native parameter."""
    t = obstacle.t_of_s(s, prec)
    with mp.workprec(prec):
        return +t


# -- tables ---------------------------------------------------------------------

@dataclass(frozen=True)
class NonEclipseCertificate:
    min_clearance: float
    worst: tuple          # (i, j, k) 1-based, the triple with the least clearance
    clearances: dict = field(repr=False)   # (i, j, k) -> clearance


_DIRS = 2048


def _separation(a_support, b_support) -> float:
    """max_u [ -h_A(-u) - h_B(u) ]: distance if positive, minus penetration otherwise."""
    def f(theta):
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1).reshape(-1, 2)
        return -a_support(-u) - b_support(u)

    th = np.linspace(0.0, TWO_PI, _DIRS, endpoint=False)
    vals = f(th)
    k = int(np.argmax(vals))
    h = TWO_PI / _DIRS
    # optimize the offset from the best sample so the relative tolerance of
    # the bounded method does not cap the accuracy at sqrt(eps)
    res = minimize_scalar(lambda x: -float(f(np.array([th[k] + x]))[0]),
                          bounds=(-h, h), method="bounded",
                          options={"xatol": 1e-15, "maxiter": 2000})
    return max(float(vals[k]), -float(res.fun))


def clearance(obstacles: Sequence[ConvexObstacle], i: int, j: int, k: int) -> float:
    """Distance from obstacle k to hull(i, j); negative values are penetration depths.

    Indices are 0-based here.
    """
    oi, oj, ok = obstacles[i], obstacles[j], obstacles[k]

    def hull(u):
        return np.maximum(oi.support_np(u), oj.support_np(u))

    return _separation(ok.support_np, hull)


def check_non_eclipse(table) -> NonEclipseCertificate:
    obs = table.obstacles if isinstance(table, BilliardTable) else list(table)
    m = len(obs)
    if m < 3:
        raise TableError("table requires m >= 3 obstacles")
    _check_disjoint(obs)
    out = {}
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(m):
                if k in (i, j):
                    continue
                c = clearance(obs, i, j, k)
                if c <= 0:
                    raise EclipseViolation(i + 1, j + 1, k + 1, -c)
                out[(i + 1, j + 1, k + 1)] = c
    worst = min(out, key=out.get)
    return NonEclipseCertificate(out[worst], worst, out)


def _check_disjoint(obs):
    for i in range(len(obs)):
        for j in range(i + 1, len(obs)):
            d = _separation(obs[i].support_np, obs[j].support_np)
            if d <= 0:
                raise TableError(f"obstacles {i + 1} and {j + 1} overlap (depth {-d:.6g})")


class BilliardTable:
    """Ordered obstacles; symbols are 1..m.

    Two-obstacle tables are allowed for orbit work but carry no non-eclipse
    certificate (the condition needs a third obstacle).
    """

    def __init__(self, obstacles: Sequence[ConvexObstacle], validate: bool = True):
        self.obstacles = tuple(obstacles)
        if len(self.obstacles) < 2:
            raise TableError("a table needs at least two obstacles")
        self.certificate = None
        if validate:
            _check_disjoint(self.obstacles)
            if len(self.obstacles) >= 3:
                self.certificate = check_non_eclipse(self)

    @property
    def m(self) -> int:
        return len(self.obstacles)

    def __len__(self):
        return self.m

    def __getitem__(self, symbol: int) -> ConvexObstacle:
        """1-based access by symbol."""
        if not 1 <= symbol <= self.m:
            raise IndexError(symbol)
        return self.obstacles[symbol - 1]

    def to_json(self) -> dict:
        return {"obstacles": [o.to_json() for o in self.obstacles]}

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    @classmethod
    def from_json(cls, doc: dict, validate: bool = True) -> "BilliardTable":
        if not isinstance(doc, dict) or not isinstance(doc.get("obstacles"), list):
            raise TableError("table document must hold an 'obstacles' list")
        return cls([make_obstacle(d) for d in doc["obstacles"]], validate=validate)

    @classmethod
    def load(cls, path, validate: bool = True) -> "BilliardTable":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"cannot read table file: {e}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise DataIOError(f"malformed table file: {e}") from None
        return cls.from_json(doc, validate=validate)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    def scaled(self, c) -> "BilliardTable":
        """Dilation about the origin by a factor c."""
        def sc(v):
            return f"({v})*({c})" if isinstance(v, str) or isinstance(c, str) else v * c

        out = []
        for o in self.obstacles:
            d = o.to_json()
            d["center"] = [sc(v) for v in d["center"]]
            if d["kind"] == "circle":
                d["radius"] = sc(d["radius"])
            elif d["kind"] == "ellipse":
                d["semi_axes"] = [sc(v) for v in d["semi_axes"]]
            else:
                d["base_radius"] = sc(d["base_radius"])
                d["cos"] = [sc(v) for v in d["cos"]]
                d["sin"] = [sc(v) for v in d["sin"]]
            out.append(make_obstacle(d))
        return BilliardTable(out, validate=self.certificate is not None)


def disc_table(discs, validate: bool = True) -> BilliardTable:
    """Convenience constructor from (cx, cy, r) triples."""
    return BilliardTable([Circle((cx, cy), r) for cx, cy, r in discs], validate=validate)


def equilateral_table(side=6, radius=1) -> BilliardTable:
    h = f"({side})*sqrt(3)/2"
    return disc_table([(0, 0, radius), (side, 0, radius), (f"({side})/2", h, radius)])
