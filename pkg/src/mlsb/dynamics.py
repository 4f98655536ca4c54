"""The billiard map in (s, phi) coordinates, its differential and monodromy.

Conventions: obstacles are traversed counterclockwise, the normal n points
away from the obstacle (into the billiard domain), T is the unit tangent, and
phi is the counterclockwise angle from n to the outgoing velocity, so that
v = cos(phi) n + sin(phi) T.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath as mp
import numpy as np

from .errors import GrazingDegenerate, NoIntersection, NonHyperbolic, Occlusion
from .geometry import BilliardTable, Circle, ConvexObstacle, Ellipse, FourierCurve
from .numeric import DEFAULT_PREC, GUARD, check_prec

GRAZING_TOL = mp.mpf("1e-8")


@dataclass(frozen=True)
class PhasePoint:
    i: int          # obstacle symbol, 1-based
    s: object       # arclength (mpf)
    phi: object     # reflection angle in [-pi/2, pi/2]


@dataclass(frozen=True)
class Escape:
    """The outgoing ray leaves the table (tau = +infinity)."""
    origin: PhasePoint


@dataclass(frozen=True)
class BouncePoint:
    """Geometric data at native parameter t of one obstacle."""
    x: object
    y: object
    tx: object
    ty: object
    nx: object
    ny: object
    speed: object
    curvature: object


def bounce_point(ob: ConvexObstacle, t) -> BouncePoint:
    x, y, dx, dy, ddx, ddy = ob.frame(t)
    sp = mp.sqrt(dx * dx + dy * dy)
    tx, ty = dx / sp, dy / sp
    k = (dx * ddy - dy * ddx) / sp ** 3
    return BouncePoint(x, y, tx, ty, ty, -tx, sp, k)


@dataclass(frozen=True)
class JetAtBounce:
    """Per-segment data of the differential from bounce k to bounce k+1."""
    ell: object
    K0: object
    K1: object
    cos0: object
    cos1: object

    @property
    def alpha(self):
        return self.ell * self.K0 + self.cos0

    @property
    def gamma(self):
        return self.ell * self.K1 + self.cos1

    @property
    def delta(self):
        return self.ell * self.K0 * self.K1 + self.K0 * self.cos1 + self.K1 * self.cos0


def segment_jet(a: BouncePoint, b: BouncePoint) -> JetAtBounce:
    ux, uy = b.x - a.x, b.y - a.y
    h = mp.sqrt(ux * ux + uy * uy)
    ux, uy = ux / h, uy / h
    return JetAtBounce(h, a.curvature, b.curvature,
                       ux * a.nx + uy * a.ny, -(ux * b.nx + uy * b.ny))


def differential(jet: JetAtBounce, tol=GRAZING_TOL):
    """D F = -(1/cos phi(k+1)) [[alpha, ell], [delta, gamma]]."""
    if jet.cos1 < tol or jet.cos0 < tol:
        raise GrazingDegenerate(f"grazing bounce (cos phi = {mp.nstr(min(jet.cos0, jet.cos1), 5)})")
    c = -1 / jet.cos1
    return mp.matrix([[c * jet.alpha, c * jet.ell], [c * jet.delta, c * jet.gamma]])


@dataclass(frozen=True)
class Monodromy:
    matrix: object
    trace: object
    lam: object       # modulus of the contracting eigenvalue
    mu: object
    le: object
    sign: int         # common sign of both eigenvalues
    period: int


def monodromy(orbit) -> Monodromy:
    """Ordered product of the per-segment differentials around the orbit.

    `orbit` is a solved PeriodicOrbit or a sequence of JetAtBounce.
    """
    jets = orbit.jets if hasattr(orbit, "jets") else list(orbit)
    prec = getattr(orbit, "precision", None) or mp.mp.prec
    with mp.workprec(prec + GUARD):
        M = mp.eye(2)
        for j in jets:
            M = differential(j) * M
        tr = M[0, 0] + M[1, 1]
        if abs(tr) <= 2 + mp.mpf(2) ** (-(prec // 2)):
            raise NonHyperbolic(f"|trace| = {mp.nstr(abs(tr), 10)} <= 2")
        sgn = 1 if tr > 0 else -1
        a = abs(tr)
        # the cancelling root form loses everything once the trace is large
        mu = (a + mp.sqrt(a * a - 4)) / 2
        lam = 1 / mu
        le = mp.log(mu) / len(jets)
    with mp.workprec(prec):
        return Monodromy(M, +tr, +lam, +mu, +le, sgn, len(jets))


# -- ray casting ------------------------------------------------------------

def _quadratic_first_root(a, b, c, eps):
    disc = b * b - 4 * a * c
    if disc < 0:
        return None
    sq = mp.sqrt(disc)
    # numerically stable pair of roots
    q = -(b + (sq if b >= 0 else -sq)) / 2
    r = sorted(x for x in ((q / a) if a else None, (c / q) if q else None) if x is not None)
    for x in r:
        if x > eps:
            return x
    return None


def ray_hit(ob: ConvexObstacle, px, py, vx, vy, eps):
    """First parameter d > eps with p + d v on the boundary, and the native t there."""
    if isinstance(ob, Circle):
        cx, cy, r = ob._params()
        ox, oy = px - cx, py - cy
        d = _quadratic_first_root(vx * vx + vy * vy, 2 * (ox * vx + oy * vy),
                                  ox * ox + oy * oy - r * r, eps)
        if d is None:
            return None
        return d, mp.atan2(oy + d * vy, ox + d * vx)
    if isinstance(ob, Ellipse):
        cx, cy, a, b, cr, sr = ob._params()
        ox, oy = px - cx, py - cy
        X, Y = (ox * cr + oy * sr) / a, (-ox * sr + oy * cr) / b
        WX, WY = (vx * cr + vy * sr) / a, (-vx * sr + vy * cr) / b
        d = _quadratic_first_root(WX * WX + WY * WY, 2 * (X * WX + Y * WY), X * X + Y * Y - 1, eps)
        if d is None:
            return None
        return d, mp.atan2(Y + d * WY, X + d * WX)
    if isinstance(ob, FourierCurve):
        return _ray_hit_fourier(ob, px, py, vx, vy, eps)
    raise TypeError(type(ob))


def _ray_hit_fourier(ob: FourierCurve, px, py, vx, vy, eps):
    cx, cy = ob._params()[:2]
    ts = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
    rmax = float(np.max(ob._radial_np(ts)[0])) * 1.01
    fp = np.array([float(px - cx), float(py - cy)])
    fv = np.array([float(vx), float(vy)])
    dc = float(-(fp @ fv))                     # parameter of closest approach to the center
    if np.linalg.norm(fp + dc * fv) >= rmax or dc + rmax <= 0:
        return None
    ds = np.linspace(max(dc - rmax, 0.0), dc, 400)
    qx, qy = fp[0] + ds * fv[0], fp[1] + ds * fv[1]
    inside = ob.inside_np(qx + cx.__float__(), qy + cy.__float__())
    idx = np.nonzero(inside & (ds > float(eps)))[0]
    if len(idx) == 0:
        return None
    k = int(idx[0])
    lo, hi = mp.mpf(ds[k - 1]) if k > 0 else mp.mpf(ds[0]), mp.mpf(ds[k])

    def F(d):
        X, Y = px - cx + d * vx, py - cy + d * vy
        r = ob._radial(mp.atan2(Y, X))[0]
        return mp.sqrt(X * X + Y * Y) - r

    # F > 0 outside, F < 0 inside; bracketed secant / bisection
    flo, fhi = F(lo), F(hi)
    if flo < 0:
        return None
    tol = mp.mpf(2) ** (-mp.mp.prec + 8)
    for _ in range(4 * mp.mp.prec):
        mid = hi - fhi * (hi - lo) / (fhi - flo)
        if not lo < mid < hi:
            mid = (lo + hi) / 2
        fm = F(mid)
        if fm > 0:
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if hi - lo < tol or abs(fm) < tol:
            break
        # guard against one-sided secant stagnation
        mid2 = (lo + hi) / 2
        f2 = F(mid2)
        if f2 > 0:
            lo, flo = mid2, f2
        else:
            hi, fhi = mid2, f2
    d = (lo + hi) / 2
    return d, mp.atan2(py - cy + d * vy, px - cx + d * vx)


def _launch(table: BilliardTable, point: PhasePoint, prec: int):
    ob = table[point.i]
    t = ob.t_of_s(point.s, prec)
    bp = bounce_point(ob, t)
    c, s = mp.cos(point.phi), mp.sin(point.phi)
    vx = c * bp.nx + s * bp.tx
    vy = c * bp.ny + s * bp.ty
    return bp, vx, vy


def _land(table, j, t, vx, vy, prec) -> PhasePoint:
    ob = table[j]
    bp = bounce_point(ob, t)
    dn = vx * bp.nx + vy * bp.ny
    wx, wy = vx - 2 * dn * bp.nx, vy - 2 * dn * bp.ny
    phi = mp.atan2(wx * bp.tx + wy * bp.ty, wx * bp.nx + wy * bp.ny)
    s = ob.s_of_t(t, prec)
    per = ob.total_length(prec)
    return PhasePoint(j, s - per * mp.floor(s / per), phi)


def _hits(table, point, bp, vx, vy):
    eps = mp.mpf(2) ** (-mp.mp.prec // 2)
    out = {}
    for k in range(1, table.m + 1):
        if k == point.i:
            continue
        r = ray_hit(table[k], bp.x, bp.y, vx, vy, eps)
        if r is not None:
            out[k] = r
    return out


def billiard_step(table: BilliardTable, point: PhasePoint, j: int,
                  prec: int = DEFAULT_PREC) -> PhasePoint:
    """Fly from `point` to obstacle j and reflect there."""
    check_prec(prec)
    if j == point.i:
        raise NoIntersection("target equals the launch obstacle")
    with mp.workprec(prec + GUARD):
        bp, vx, vy = _launch(table, point, prec)
        hits = _hits(table, point, bp, vx, vy)
        if j not in hits:
            raise NoIntersection(f"ray from obstacle {point.i} misses obstacle {j}")
        dj = hits[j][0]
        for k, (d, _) in sorted(hits.items()):
            if k != j and d < dj:
                raise Occlusion(k)
        out = _land(table, j, hits[j][1], vx, vy, prec)
    with mp.workprec(prec):
        return PhasePoint(out.i, +out.s, +out.phi)


def free_flight(table: BilliardTable, point: PhasePoint, prec: int = DEFAULT_PREC):
    """First obstacle hit by the outgoing ray, or Escape."""
    check_prec(prec)
    with mp.workprec(prec + GUARD):
        bp, vx, vy = _launch(table, point, prec)
        hits = _hits(table, point, bp, vx, vy)
        if not hits:
            return Escape(point)
        j = min(hits, key=lambda k: hits[k][0])
        out = _land(table, j, hits[j][1], vx, vy, prec)
    with mp.workprec(prec):
        return PhasePoint(out.i, +out.s, +out.phi)


def chord(table: BilliardTable, i: int, s, j: int, s2, prec: int = DEFAULT_PREC):
    """h(s, s') = |gamma_i(s) - gamma_j(s')|."""
    with mp.workprec(check_prec(prec) + GUARD):
        a = table[i].frame(table[i].t_of_s(s, prec))
        b = table[j].frame(table[j].t_of_s(s2, prec))
        h = mp.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)
    with mp.workprec(prec):
        return +h


def reverse(point: PhasePoint) -> PhasePoint:
    """Time reversal I: (s, phi) -> (s, -phi)."""
    return PhasePoint(point.i, point.s, -point.phi)


# -- second-order expansion of the generating function ------------------------

@dataclass(frozen=True)
class Jet2:
    h: object
    zeta_minus: object
    zeta_plus: object
    first_order: object
    quadratic: object
    predicted: object   # h + first_order + quadratic
    exact: object       # h at the perturbed pair

    @property
    def remainder(self):
        return self.exact - self.predicted


def jet2_chord(table: BilliardTable, x: tuple, xbar: tuple, prec: int = DEFAULT_PREC,
               variables: str = "osculating") -> Jet2:
    """Second-order expansion of h around the chord x = (i, s, j, s').

    xbar = (sbar, sbar') are the perturbed endpoints. The expansion is
        h(xbar) ~ h + first + (h/2)[z-(1+z-) a^2 + 2 z- z+ a b + z+(1+z+) b^2]
    with z- = R cos(phi)/h, z+ = R' cos(phi')/h. With variables="osculating"
    the increments a, b are angular displacements on the osculating circles,
    a = (sbar - s)/R and b = (sbar' - s')/R', and first = -R sin(phi) a +
    R' sin(phi') b; this is exact to second order. variables="reflection"
    uses a = phi - phibar, b = phi' - phibar' and first = R sin(phi) a +
    R' sin(phi') b instead, which is kept as a diagnostic.
    """
    i, s, j, s2 = x
    sb, s2b = xbar
    with mp.workprec(check_prec(prec) + GUARD):
        obi, obj = table[i], table[j]
        A = bounce_point(obi, obi.t_of_s(s, prec))
        B = bounce_point(obj, obj.t_of_s(s2, prec))
        Ab = bounce_point(obi, obi.t_of_s(sb, prec))
        Bb = bounce_point(obj, obj.t_of_s(s2b, prec))

        def angles(P, Q):
            ux, uy = Q.x - P.x, Q.y - P.y
            h = mp.sqrt(ux * ux + uy * uy)
            ux, uy = ux / h, uy / h
            phi = mp.atan2(ux * P.tx + uy * P.ty, ux * P.nx + uy * P.ny)
            # outgoing angle at Q after reflection of the incoming direction u
            dn = ux * Q.nx + uy * Q.ny
            wx, wy = ux - 2 * dn * Q.nx, uy - 2 * dn * Q.ny
            phi2 = mp.atan2(wx * Q.tx + wy * Q.ty, wx * Q.nx + wy * Q.ny)
            return h, phi, phi2

        h, phi, phi2 = angles(A, B)
        hb, phib, phi2b = angles(Ab, Bb)
        R, R2 = 1 / A.curvature, 1 / B.curvature
        zm, zp = R * mp.cos(phi) / h, R2 * mp.cos(phi2) / h
        if variables == "osculating":
            a, b = (sb - s) / R, (s2b - s2) / R2
            first = -R * mp.sin(phi) * a + R2 * mp.sin(phi2) * b
        elif variables == "reflection":
            a, b = phi - phib, phi2 - phi2b
            first = R * mp.sin(phi) * a + R2 * mp.sin(phi2) * b
        else:
            raise ValueError(variables)
        quad = h / 2 * (zm * (1 + zm) * a * a + 2 * zm * zp * a * b + zp * (1 + zp) * b * b)
        res = Jet2(h, zm, zp, first, quad, h + first + quad, hb)
    with mp.workprec(prec):
        return Jet2(*(+v for v in (res.h, res.zeta_minus, res.zeta_plus, res.first_order,
                                   res.quadratic, res.predicted, res.exact)))


def orbit_jets(points: Sequence[BouncePoint]) -> list:
    p = len(points)
    return [segment_jet(points[k], points[(k + 1) % p]) for k in range(p)]
