"""Periodic orbits as stationary points of the length functional.

Newton iterations run on the native shape parameters t_k. The Hessian of
L(t_1..t_p) = sum_k h(t_k, t_{k+1}) is cyclic tridiagonal, so each step is an
O(p) Sherman-Morrison corrected Thomas solve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import mpmath as mp
import numpy as np

from . import dynamics
from .dynamics import BouncePoint, PhasePoint, bounce_point, orbit_jets
from .errors import InadmissibleWord, ItineraryMismatch, NoConvergence
from .geometry import BilliardTable, Circle, Ellipse, _separation
from .numeric import DEFAULT_PREC, GUARD, check_prec, to_decimal
from .symbolic import is_admissible, render_word

MAX_ITER = 60


# -- linear algebra -------------------------------------------------------------

def solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas algorithm. lower[0] and upper[-1] are ignored."""
    n = len(diag)
    c = [None] * n
    d = [None] * n
    c[0] = upper[0] / diag[0] if n > 1 else 0
    d[0] = rhs[0] / diag[0]
    for k in range(1, n):
        den = diag[k] - lower[k] * c[k - 1]
        c[k] = upper[k] / den if k < n - 1 else 0
        d[k] = (rhs[k] - lower[k] * d[k - 1]) / den
    x = [None] * n
    x[-1] = d[-1]
    for k in range(n - 2, -1, -1):
        x[k] = d[k] - c[k] * x[k + 1]
    return x


def solve_cyclic_tridiagonal(lower, diag, upper, rhs):
    """Solve A x = rhs with A[k,k-1] = lower[k], A[k,k] = diag[k], A[k,k+1] = upper[k].

    Indices are cyclic, so lower[0] = A[0,p-1] and upper[p-1] = A[p-1,0].
    Works for any field type (floats, mpf). Requires p >= 3.
    """
    p = len(diag)
    if p < 3:
        raise ValueError("cyclic tridiagonal solve needs p >= 3")
    a_c, b_c = lower[0], upper[p - 1]
    gam = -diag[0] if diag[0] != 0 else -1
    bd = list(diag)
    bd[0] = diag[0] - gam
    bd[-1] = diag[-1] - a_c * b_c / gam
    y = solve_tridiagonal(lower, bd, upper, rhs)
    u = [gam] + [0 * gam] * (p - 2) + [b_c]
    z = solve_tridiagonal(lower, bd, upper, u)
    vy = y[0] + a_c / gam * y[-1]
    vz = z[0] + a_c / gam * z[-1]
    f = vy / (1 + vz)
    return [y[k] - f * z[k] for k in range(p)]


@dataclass(frozen=True)
class CyclicTridiagonal:
    lower: list
    diag: list
    upper: list

    def to_dense(self) -> np.ndarray:
        p = len(self.diag)
        A = np.zeros((p, p))
        for k in range(p):
            A[k, k] += float(self.diag[k])
            A[k, (k - 1) % p] += float(self.lower[k])
            A[k, (k + 1) % p] += float(self.upper[k])
        return A


# -- length functional ------------------------------------------------------------

def _frames(table, word, ts):
    return [table[w].frame(t) for w, t in zip(word, ts)]


def _functional(table, word, ts):
    """Length, gradient and Hessian (diag, coupling k->k+1) in the t variables."""
    p = len(word)
    F = _frames(table, word, ts)
    g = [mp.mpf(0)] * p
    diag = [mp.mpf(0)] * p
    off = [mp.mpf(0)] * p
    L = mp.mpf(0)
    for k in range(p):
        j = (k + 1) % p
        a, b = F[k], F[j]
        dx, dy = a[0] - b[0], a[1] - b[1]
        h = mp.sqrt(dx * dx + dy * dy)
        L += h
        ux, uy = dx / h, dy / h
        ga = a[2] * ux + a[3] * uy
        gb = -(b[2] * ux + b[3] * uy)
        g[k] += ga
        g[j] += gb
        diag[k] += a[4] * ux + a[5] * uy + (a[2] ** 2 + a[3] ** 2 - ga * ga) / h
        diag[j] += -(b[4] * ux + b[5] * uy) + (b[2] ** 2 + b[3] ** 2 - gb * gb) / h
        off[k] = -((a[2] * b[2] + a[3] * b[3]) + ga * gb) / h
    speeds = [mp.sqrt(f[2] ** 2 + f[3] ** 2) for f in F]
    return L, g, diag, off, speeds, F


def _newton_step(g, diag, off):
    p = len(g)
    if p == 2:
        h01 = off[0] + off[1]
        det = diag[0] * diag[1] - h01 * h01
        return [(diag[1] * g[0] - h01 * g[1]) / det, (diag[0] * g[1] - h01 * g[0]) / det]
    lower = [off[(k - 1) % p] for k in range(p)]
    return solve_cyclic_tridiagonal(lower, diag, off, g)


def _tolerance(prec, L):
    return mp.mpf(2) ** (-(prec - 10)) * L


def min_gap(table: BilliardTable) -> float:
    cached = getattr(table, "_min_gap", None)
    if cached is None:
        obs = table.obstacles
        cached = min(_separation(obs[i].support_np, obs[j].support_np)
                     for i in range(len(obs)) for j in range(i + 1, len(obs)))
        table._min_gap = cached
    return cached


def _newton(table, word, ts, prec, max_iter=MAX_ITER, trace=None):
    cap = mp.mpf(min_gap(table)) / 4
    with mp.workprec(prec + GUARD):
        ts = [mp.mpf(t) for t in ts]
        for it in range(max_iter):
            L, g, diag, off, sp, _ = _functional(table, word, ts)
            gs = max(abs(gk / s) for gk, s in zip(g, sp))
            if trace is not None:
                trace.append(float(gs))
            if gs < _tolerance(prec, L):
                return ts, it
            d = _newton_step(g, diag, off)
            # trust region: at most cap of arclength per bounce per step
            for k in range(len(ts)):
                step = d[k]
                if abs(step) * sp[k] > cap:
                    step = mp.sign(step) * cap / sp[k]
                ts[k] -= step
    raise NoConvergence(f"no convergence for {render_word(word)} at {prec} bits", trace or ())


# -- float64 initialization ----------------------------------------------------------

def _nearest_t(ob, q):
    if isinstance(ob, Circle):
        c = ob.center_f
        return math.atan2(q[1] - c[1], q[0] - c[0])
    ts = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    x, y, *_ = ob.frame_np(ts)
    t = ts[int(np.argmin((x - q[0]) ** 2 + (y - q[1]) ** 2))]
    for _ in range(20):
        x, y, dx, dy, ddx, ddy = ob.frame_np(np.array([t]))
        f = (x - q[0]) * dx + (y - q[1]) * dy
        df = dx * dx + dy * dy + (x - q[0]) * ddx + (y - q[1]) * ddy
        t = float(t - (f / df)[0]) if df[0] > 0 else t
    return float(t)


def _coordinate_descent(table, word, ts, sweeps):
    p = len(word)
    ts = list(ts)
    for _ in range(sweeps):
        for k in range(p):
            ob = table[word[k]]
            nb = [table[word[(k + e) % p]].frame_np(np.array([ts[(k + e) % p]])) for e in (-1, 1)]
            t = ts[k]
            for _ in range(8):
                x, y, dx, dy, ddx, ddy = ob.frame_np(np.array([t]))
                g = 0.0
                H = 0.0
                for q in nb:
                    ex, ey = x - q[0], y - q[1]
                    h = np.hypot(ex, ey)
                    ux, uy = ex / h, ey / h
                    gk = dx * ux + dy * uy
                    g += gk
                    H += ddx * ux + ddy * uy + (dx * dx + dy * dy - gk * gk) / h
                g, H = float(g[0]), float(H[0])
                step = g / H if H > 0 else math.copysign(0.1, g)
                step = max(min(step, 0.5), -0.5)
                t -= step
                if abs(step) < 1e-14:
                    break
            ts[k] = t
    return ts


def initial_guess(table, word, seed=None, sweeps=5):
    """Nearest point to the centroid of the neighbours' centers, then descent sweeps.

    With a seed, start instead from uniformly random parameters.
    """
    p = len(word)
    if seed is None:
        ts = []
        for k in range(p):
            q = (table[word[k - 1]].center_f + table[word[(k + 1) % p]].center_f) / 2
            ts.append(_nearest_t(table[word[k]], q))
    else:
        rng = np.random.default_rng(seed)
        ts = list(rng.uniform(0, 2 * np.pi, size=p))
    return _coordinate_descent(table, word, ts, sweeps)


# -- itinerary check -----------------------------------------------------------------

def _segment_hits(ob, a, b) -> bool:
    if isinstance(ob, (Circle, Ellipse)):
        if isinstance(ob, Circle):
            c = ob.center_f
            r = ob.radius.__float__()
            A, B = (a - c) / r, (b - c) / r
        else:
            cx, cy, ax, bx, cr, sr = ob._fparams()
            def loc(P):
                X, Y = P[0] - cx, P[1] - cy
                return np.array([(X * cr + Y * sr) / ax, (-X * sr + Y * cr) / bx])
            A, B = loc(a), loc(b)
        d = B - A
        s = np.clip(-(A @ d) / (d @ d), 0.0, 1.0)
        return float(np.linalg.norm(A + s * d)) < 1.0
    s = np.linspace(0.0, 1.0, 2049)
    P = a[None, :] + s[:, None] * (b - a)[None, :]
    return bool(np.any(ob.inside_np(P[:, 0], P[:, 1])))


def check_itinerary(table, word, points: Sequence[BouncePoint]):
    p = len(word)
    xy = [np.array([float(q.x), float(q.y)]) for q in points]
    for k in range(p):
        j = (k + 1) % p
        a, b = points[k], points[j]
        ux, uy = b.x - a.x, b.y - a.y
        if ux * a.nx + uy * a.ny <= 0 or ux * b.nx + uy * b.ny >= 0:
            raise ItineraryMismatch(f"segment {k} of {render_word(word)} passes through its own obstacle")
        for o in range(1, table.m + 1):
            if o in (word[k], word[j]):
                continue
            if _segment_hits(table[o], xy[k], xy[j]):
                raise ItineraryMismatch(
                    f"segment {k} of {render_word(word)} is occluded by obstacle {o}")


# -- orbits ----------------------------------------------------------------------------------

@dataclass
class PeriodicOrbit:
    table: BilliardTable = field(repr=False)
    word: tuple
    precision: int
    ts: list = field(repr=False)
    points: list
    length: object
    gradient_norm: object
    reflection_residual: object
    jets: list = field(repr=False)
    iterations: int = 0
    inertia: tuple = (0, 0, 0)

    @cached_property
    def monodromy(self) -> dynamics.Monodromy:
        return dynamics.monodromy(self)

    @property
    def period(self) -> int:
        return len(self.word)

    def to_json(self) -> dict:
        P = self.precision
        return {
            "word": render_word(self.word),
            "precision_bits": P,
            "length": to_decimal(self.length, P),
            "bounces": [{"obstacle": q.i, "s": to_decimal(q.s, P), "phi": to_decimal(q.phi, P)}
                        for q in self.points],
            "residuals": {"gradient": to_decimal(self.gradient_norm, P),
                          "reflection": to_decimal(self.reflection_residual, P)},
            "hessian_inertia": {"negative": self.inertia[0], "zero": self.inertia[1],
                                "positive": self.inertia[2]},
        }


def _assemble(table, word, ts, prec, iterations) -> PeriodicOrbit:
    p = len(word)
    with mp.workprec(prec + GUARD):
        bps = [bounce_point(table[w], t) for w, t in zip(word, ts)]
        check_itinerary(table, word, bps)
        L, g, diag, off, sp, _ = _functional(table, word, ts)
        grad = max(abs(gk / s) for gk, s in zip(g, sp))
        pts = []
        refl = mp.mpf(0)
        for k in range(p):
            a, b, c = bps[k - 1], bps[k], bps[(k + 1) % p]
            wx, wy = b.x - a.x, b.y - a.y
            wn = mp.sqrt(wx * wx + wy * wy)
            vx, vy = c.x - b.x, c.y - b.y
            vn = mp.sqrt(vx * vx + vy * vy)
            vx, vy = vx / vn, vy / vn
            phi = mp.atan2(vx * b.tx + vy * b.ty, vx * b.nx + vy * b.ny)
            phi_in = mp.atan2((wx * b.tx + wy * b.ty) / wn, -(wx * b.nx + wy * b.ny) / wn)
            refl = max(refl, abs(phi - phi_in))
            pts.append(PhasePoint(word[k], table[word[k]].s_of_t(ts[k], prec), phi))
        jets = orbit_jets(bps)
        H = np.zeros((p, p))
        for k in range(p):
            H[k, k] += float(diag[k])
            H[k, (k + 1) % p] += float(off[k])
            H[(k + 1) % p, k] += float(off[k])
        ev = np.linalg.eigvalsh(H)
        scale = max(1.0, float(np.max(np.abs(ev))))
        zero = int(np.sum(np.abs(ev) <= 1e-10 * scale))
        inertia = (int(np.sum(ev < -1e-10 * scale)), zero, int(np.sum(ev > 1e-10 * scale)))
    with mp.workprec(prec):
        return PeriodicOrbit(
            table=table, word=tuple(word), precision=prec, ts=[+t for t in ts],
            points=[PhasePoint(q.i, +q.s, +q.phi) for q in pts], length=+L,
            gradient_norm=+grad, reflection_residual=+refl, jets=jets,
            iterations=iterations, inertia=inertia)


def solve_periodic(table: BilliardTable, word, precision: int = DEFAULT_PREC,
                   seed=None, sweeps: int = 5, max_iter: int = MAX_ITER,
                   init=None) -> PeriodicOrbit:
    """Periodic orbit realizing `word`.

    Options: `seed` switches to a random start, `sweeps` sets the number of
    coordinate-descent passes, `init` gives explicit native parameters.
    """
    prec = check_prec(precision)
    word = tuple(int(x) for x in word)
    if not is_admissible(word, table.m):
        raise InadmissibleWord(f"word {render_word(word)} is not admissible")
    if init is None:
        ts = initial_guess(table, word, seed=seed, sweeps=sweeps)
    else:
        ts = list(init)
    trace: list = []
    its = 0
    if prec > 80:
        ts, its = _newton(table, word, ts, 64, max_iter, trace)
    ts, it2 = _newton(table, word, ts, prec, max_iter, trace)
    return _assemble(table, word, ts, prec, its + it2)


def refine(orbit: PeriodicOrbit, precision: int) -> PeriodicOrbit:
    prec = check_prec(precision)
    ts, its = _newton(orbit.table, orbit.word, orbit.ts, prec)
    return _assemble(orbit.table, orbit.word, ts, prec, its)


def rotate_orbit(orbit: PeriodicOrbit, k: int) -> list:
    return orbit.points[k:] + orbit.points[:k]


# -- arclength-facing gradient and Hessian ------------------------------------------------

def _ts_from_s(table, word, s_vec, prec):
    return [table[w].t_of_s(s, prec) for w, s in zip(word, s_vec)]


def length_gradient(table: BilliardTable, word, s_vec, prec: int = DEFAULT_PREC) -> list:
    """dL/ds_k = sin(phi_k^-) - sin(phi_k^+)."""
    with mp.workprec(check_prec(prec) + GUARD):
        ts = _ts_from_s(table, word, s_vec, prec)
        _, g, _, _, sp, _ = _functional(table, word, ts)
        out = [gk / s for gk, s in zip(g, sp)]
    with mp.workprec(prec):
        return [+x for x in out]


def length_hessian(table: BilliardTable, word, s_vec, prec: int = DEFAULT_PREC) -> CyclicTridiagonal:
    """Hessian of L in arclength coordinates, cyclic tridiagonal."""
    p = len(word)
    with mp.workprec(check_prec(prec) + GUARD):
        ts = _ts_from_s(table, word, s_vec, prec)
        _, g, diag, off, sp, F = _functional(table, word, ts)
        dsp = [(f[2] * f[4] + f[3] * f[5]) / s for f, s in zip(F, sp)]
        d = [diag[k] / sp[k] ** 2 - g[k] * dsp[k] / sp[k] ** 3 for k in range(p)]
        o = [off[k] / (sp[k] * sp[(k + 1) % p]) for k in range(p)]
        if p == 2:
            o = [o[0] + o[1], o[0] + o[1]]
            lower = [mp.mpf(0), o[0]]
            upper = [o[0], mp.mpf(0)]
        else:
            lower = [o[(k - 1) % p] for k in range(p)]
            upper = o
    with mp.workprec(prec):
        return CyclicTridiagonal([+x for x in lower], [+x for x in d], [+x for x in upper])
