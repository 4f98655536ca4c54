"""Inverse procedures: from stored lengths to lambda, LE, radii and disc tables.

Every estimator here reads only a SpectrumStore. `verify_leading_term` is the one
forward-side routine; it imports the solver lazily.

Conventions for the period-two family tau sigma^n with sigma = (s1, s0) and
tau = (tau1, s0): R0 is the radius at the bounce on s0, R1 at the bounce on
s1, X_i = R_i / ell with ell = L(sigma)/2. Deficits are written
D_n = -C_parity lambda^n, and rho = C_even / C_odd.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Sequence

import mpmath as mp
import numpy as np

from .errors import (InconsistentSystem, InsufficientData, InsufficientPrecision,
                     NonGeometric, NoPositiveRoot)
from .numeric import to_decimal
from .spectrum import FamilySpec, SpectrumStore
from .symbolic import render_word

# bits of headroom a difference must keep above rounding to count as signal
SIGNAL_BITS = 16


# -- series -----------------------------------------------------------------------

@dataclass
class DeficitSeries:
    sigma: tuple
    tau: tuple
    kind: str
    L_sigma: object
    terms: dict            # n -> a_n
    precision: dict        # n -> bits used for a_n

    @property
    def prec(self) -> int:
        return max(self.precision.values())


def deficit_series(store: SpectrumStore, spec: FamilySpec) -> DeficitSeries:
    """a_n = L(word_n) - multiplier(n) L(sigma), read from the store only."""
    es = store.get(spec.sigma)
    if es is None:
        raise InsufficientData(f"store lacks sigma = {render_word(spec.sigma)}")
    terms, precs = {}, {}
    for n in spec.ns:
        e = store.get(spec.word(n))
        if e is None:
            continue
        p = min(e.precision_bits, es.precision_bits)
        with mp.workprec(p):
            terms[n] = e.length_value - spec.multiplier(n) * es.length_value
        precs[n] = p
    if not terms:
        raise InsufficientData("no family words in the store")
    return DeficitSeries(tuple(spec.sigma), tuple(spec.tau), spec.kind, es.length_value,
                         terms, precs)


# -- geometric tail elimination ---------------------------------------------------------

@dataclass
class ParityFit:
    parity: int
    triples: list          # (n0, lam, linfty, amplitude) per usable triple
    lam: object
    linfty: object
    amplitude: object      # C in a_n = L - C lam^n
    lam_spread: object
    linfty_spread: object
    amplitude_spread: object


@dataclass
class TailEstimate:
    linfty: object
    lam: object
    linfty_spread: object
    lam_spread: object
    even: ParityFit | None
    odd: ParityFit | None
    parity_consistent: bool

    def amplitude(self, parity: int):
        f = self.even if parity == 0 else self.odd
        return None if f is None else f.amplitude


def _spread(vals):
    if len(vals) < 2:
        return mp.inf
    return abs(vals[-1] - vals[-2])


def _fit_parity(series: DeficitSeries, parity: int, min_terms: int):
    ns = sorted(n for n in series.terms if n % 2 == parity)
    if len(ns) < max(3, min_terms):
        return None
    a = series.terms
    triples = []
    noisy = 0
    for n0 in ns:
        if n0 + 2 not in a or n0 + 4 not in a:
            continue
        prec = min(series.precision[n0], series.precision[n0 + 2], series.precision[n0 + 4])
        with mp.workprec(prec):
            d1 = a[n0 + 2] - a[n0]
            d2 = a[n0 + 4] - a[n0 + 2]
            floor = mp.mpf(2) ** (-(prec - SIGNAL_BITS)) * max(1, abs(a[n0 + 4]))
            if abs(d2) < floor:
                noisy += 1
                continue
            q = d2 / d1
            if not 0 < q < 1:
                raise NonGeometric(f"triple at n={n0} has ratio {mp.nstr(q, 6)} outside (0,1)")
            lam = mp.sqrt(q)
            linf = a[n0 + 4] + d2 * q / (1 - q)
            amp = (linf - a[n0 + 4]) / lam ** (n0 + 4)
            triples.append((n0, lam, linf, amp))
    if not triples:
        if noisy:
            raise InsufficientPrecision("triple differences are dominated by rounding")
        return None
    lams = [t[1] for t in triples]
    lins = [t[2] for t in triples]
    amps = [t[3] for t in triples]
    return ParityFit(parity, triples, lams[-1], lins[-1], amps[-1],
                     _spread(lams), _spread(lins), _spread(amps))


def estimate_linfty_lambda(series: DeficitSeries, min_terms: int = 3) -> TailEstimate:
    """Exact three-term fits a_n = L - C lam^n on sliding same-parity triples.

    The last triple of each parity gives the estimate, the change from the
    previous triple gives the spread.
    """
    with mp.workprec(series.prec):
        fe = _fit_parity(series, 0, min_terms)
        fo = _fit_parity(series, 1, min_terms)
        fits = [f for f in (fe, fo) if f is not None]
        if not fits:
            raise InsufficientData("need at least three same-parity terms")
        best = max(fits, key=lambda f: f.triples[-1][0])
        lam_sp, lin_sp = best.lam_spread, best.linfty_spread
        consistent = True
        if len(fits) == 2:
            dl, dL = abs(fe.lam - fo.lam), abs(fe.linfty - fo.linfty)
            consistent = bool(dl <= 10 * max(fe.lam_spread, fo.lam_spread)
                              and dL <= 10 * max(fe.linfty_spread, fo.linfty_spread))
            if not mp.isinf(lam_sp):
                lam_sp, lin_sp = max(lam_sp, dl), max(lin_sp, dL)
            else:
                lam_sp, lin_sp = dl, dL
        return TailEstimate(best.linfty, best.lam, lin_sp, lam_sp, fe, fo, consistent)


@dataclass
class RhoEstimate:
    rho: object             # C_even / C_odd
    spread: object
    rho_reverse: object     # C_odd / C_even from (odd, even) pairs
    reverse_spread: object


def estimate_rho(series: DeficitSeries, lam, linfty) -> RhoEstimate:
    """rho from consecutive deficits: D_n lam / D_{n+1} for even n."""
    with mp.workprec(series.prec):
        D = {n: a - linfty for n, a in series.terms.items()}

        def ratios(parity):
            out = []
            for n in sorted(D):
                if n % 2 == parity and n + 1 in D and D[n + 1] != 0:
                    out.append(D[n] * lam / D[n + 1])
            return out

        fw, bw = ratios(0), ratios(1)
        if not fw:
            raise InsufficientData("need consecutive (even, odd) terms to estimate rho")
        rr = bw[-1] if bw else mp.nan
        return RhoEstimate(fw[-1], _spread(fw), rr, _spread(bw) if bw else mp.inf)


# -- period-two algebra ------------------------------------------------------------------

def quadratic_form_Q(X, Y, lam):
    return (1 + lam ** 2) * (1 + X) ** 2 - (1 + lam) ** 2 * X * Y + 2 * lam * (1 + Y) ** 2


def lambda_from_radii(L, R0, R1):
    """Root in (0,1) of lam^2 - (4 a0 a1 - 2) lam + 1 = 0, a_i = L/(2 R_i) + 1."""
    a0, a1 = L / (2 * R0) + 1, L / (2 * R1) + 1
    tr = 4 * a0 * a1 - 2
    return 2 / (tr + mp.sqrt(tr * tr - 4))


@dataclass
class RadiiResult:
    R0: object
    R1: object
    branch: str                          # "symmetric", "asymmetric" or "ambiguous"
    candidates: list = field(default_factory=list)   # [(R0, R1, res_rho, res_eig)]


def _eig_residual(lam, X0, X1):
    return 4 * lam * (1 + X0) * (1 + X1) - (1 + lam) ** 2 * X0 * X1


def recover_radii(rho, lam, L_sigma, rho_spread=0, tie_factor=10) -> RadiiResult:
    """Radii at the two bounces of the period-two orbit from (rho, lam, L)."""
    if not (rho > 0 and 0 < lam < 1 and L_sigma > 0):
        raise NoPositiveRoot("need rho > 0, 0 < lambda < 1 and L > 0")
    ell = L_sigma / 2
    sq = mp.sqrt(lam)
    if abs(rho - 1) <= tie_factor * rho_spread or rho == 1:
        X = 2 * sq / (1 - sq) ** 2
        return RadiiResult(X * ell, X * ell, "symmetric",
                           [(X * ell, X * ell, mp.mpf(0), _eig_residual(lam, X, X))])
    # with u = 1 + X0, v = 1 + X1 the eigenvalue identity turns the rho
    # equation into a homogeneous quadratic in t = u / v
    A = 1 + lam ** 2 - 2 * rho * lam
    B = -4 * lam * (1 - rho)
    C = 2 * lam - rho * (1 + lam ** 2)
    ts = _real_roots(A, B, C)
    cands = []
    tol = mp.mpf(10) ** (-10)
    for t in ts:
        if t <= 0:
            continue
        # eigenvalue identity with u = t v: (1-lam)^2 t v^2 - (1+lam)^2 (t+1) v + (1+lam)^2 = 0
        for v in _real_roots((1 - lam) ** 2 * t, -(1 + lam) ** 2 * (t + 1), (1 + lam) ** 2):
            u = t * v
            if u <= 1 or v <= 1:
                continue
            X0, X1 = u - 1, v - 1
            r1 = quadratic_form_Q(X0, X1, lam) - rho * quadratic_form_Q(X1, X0, lam)
            r1 /= max(1, abs(quadratic_form_Q(X0, X1, lam)))
            r2 = _eig_residual(lam, X0, X1) / ((1 + lam) ** 2 * X0 * X1)
            if abs(r1) < tol and abs(r2) < tol:
                cands.append((X0 * ell, X1 * ell, r1, r2))
    if not cands:
        raise NoPositiveRoot("no positive radius pair satisfies both equations")
    if len(cands) > 1:
        return RadiiResult(None, None, "ambiguous", cands)
    return RadiiResult(cands[0][0], cands[0][1], "asymmetric", cands)


def _real_roots(a, b, c):
    if a == 0:
        return [] if b == 0 else [-c / b]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    sq = mp.sqrt(disc)
    q = -(b + (sq if b >= 0 else -sq)) / 2
    out = [q / a]
    if q != 0:
        out.append(c / q)
    return sorted(out)


@dataclass
class Invariants:
    alpha1: object         # at the s1 bounce
    alpha2: object         # at the s0 bounce
    C1s: object
    C1phi: object
    C2s: object
    C2phi: object
    C_phi_s: object
    xi2: object            # from the stated leading term with Q
    xi2_corrected: object  # from the leading term with Q replaced by (1 + lam)^2
    Q_used: object
    relation_c1s: object   # C1s/C1phi + 4 a2 lam ell / (1 - lam^2)
    relation_sq: object    # (C2phi/C1phi)^2 - lam a2 / a1
    relation_lin: object   # C2phi/C1phi + (1 + lam) / (2 a1)


def period_two_matrices(ell, R_s1, R_s0):
    """D F at the s1 bounce and D F^2 based there."""
    a1, a2 = ell / R_s1 + 1, ell / R_s0 + 1
    g = (a1 * a2 - 1) / ell
    DF1 = -mp.matrix([[a1, ell], [g, a2]])
    DF2 = -mp.matrix([[a2, ell], [g, a1]])
    return a1, a2, DF1, DF2 * DF1


def stable_vector(M):
    """Unit eigenvector of the contracting eigenvalue, phi-component positive."""
    tr = M[0, 0] + M[1, 1]
    a = abs(tr)
    lam = 2 / (a + mp.sqrt(a * a - 4)) * (1 if tr > 0 else -1)
    # (M - lam I) v = 0 using the better-conditioned row
    if abs(M[0, 1]) >= abs(M[1, 0]):
        v = (M[0, 1], lam - M[0, 0])
    else:
        v = (lam - M[1, 1], M[1, 0])
    n = mp.sqrt(v[0] ** 2 + v[1] ** 2)
    v = (v[0] / n, v[1] / n)
    if v[1] < 0:
        v = (-v[0], -v[1])
    return lam, v


def recover_invariants(lam, L_sigma, R0, R1, amplitude, parity: int = 0) -> Invariants:
    """xi_inf^2 and C_phi^s from the fitted deficit amplitude of one parity.

    amplitude is C in D_n = -C lam^n. The matrix D F^2 is rebuilt from
    (ell, R0, R1); its own contracting eigenvalue is used for the eigenvector
    relations so those hold to working precision.
    """
    ell = L_sigma / 2
    a1, a2, DF1, M = period_two_matrices(ell, R1, R0)
    lam_m, v1 = stable_vector(M)
    v2 = DF1 * mp.matrix([v1[0], v1[1]])
    C1s, C1phi = v1
    C2s, C2phi = v2[0], v2[1]
    Cps = 2 * C1phi ** 2 / ((1 - lam_m ** 2) * a1)
    X0, X1 = R0 / ell, R1 / ell
    Q = quadratic_form_Q(X0, X1, lam) if parity == 0 else quadratic_form_Q(X1, X0, lam)
    xi2 = amplitude / (ell * Cps * Q * lam)
    xi2c = amplitude / (ell * Cps * (1 + lam) ** 2 * lam)
    return Invariants(
        a1, a2, C1s, C1phi, C2s, C2phi, Cps, xi2, xi2c, Q,
        C1s / C1phi + 4 * a2 * lam_m * ell / (1 - lam_m ** 2),
        (C2phi / C1phi) ** 2 - lam_m * a2 / a1,
        C2phi / C1phi + (1 + lam_m) / (2 * a1))


# -- Lyapunov exponents from lengths ------------------------------------------------------

@dataclass
class LyapunovEstimate:
    le: object
    le_spread: object
    lam: object
    C_even: object
    C_odd: object
    C_even_spread: object
    C_odd_spread: object
    tail: TailEstimate

    @property
    def parity_split_resolved(self) -> bool:
        if self.C_even is None or self.C_odd is None:
            return False
        return bool(abs(self.C_even - self.C_odd) > self.C_even_spread + self.C_odd_spread)


def lyapunov_from_mls(series: DeficitSeries, min_terms: int = 3) -> LyapunovEstimate:
    """LE(sigma) = -(1/p) log lam from the deficit tail of either family."""
    tail = estimate_linfty_lambda(series, min_terms)
    p = len(series.sigma)
    with mp.workprec(series.prec):
        le = -mp.log(tail.lam) / p
        le_sp = tail.lam_spread / (tail.lam * p)
        fe, fo = tail.even, tail.odd
        return LyapunovEstimate(le, le_sp, tail.lam,
                                fe.amplitude if fe else None, fo.amplitude if fo else None,
                                fe.amplitude_spread if fe else mp.inf,
                                fo.amplitude_spread if fo else mp.inf, tail)


# -- reports --------------------------------------------------------------------------------

def _dec(x, prec=64):
    if x is None:
        return None
    if isinstance(x, (int, str, bool)):
        return x
    if mp.isinf(x) or mp.isnan(x):
        return str(x)
    return to_decimal(x, prec)


@dataclass
class InversionReport:
    mode: str
    sigma: str
    tau: str
    values: dict           # name -> mpf (or None)
    errors: dict           # name -> mpf error estimate
    diagnostics: dict      # plain JSON values
    precision: int = 64

    def to_json(self) -> dict:
        P = self.precision
        return {
            "mode": self.mode, "sigma": self.sigma, "tau": self.tau, "precision_bits": P,
            "values": {k: _dec(v, P) for k, v in self.values.items()},
            "errors": {k: _dec(v, 64) for k, v in self.errors.items()},
            "diagnostics": self.diagnostics,
        }


def _radii_errors(rho, rho_sp, lam, lam_sp, L, base: RadiiResult):
    """Error bars by perturbing rho and lambda within their spreads."""
    errs = [mp.mpf(0), mp.mpf(0)]
    for dr, dl in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        r = rho + dr * (0 if mp.isinf(rho_sp) else rho_sp)
        lm = lam + dl * (0 if mp.isinf(lam_sp) else lam_sp)
        try:
            alt = recover_radii(r, lm, L, rho_sp if base.branch == "symmetric" else 0)
        except NoPositiveRoot:
            continue
        if alt.R0 is None:
            continue
        errs[0] = max(errs[0], abs(alt.R0 - base.R0))
        errs[1] = max(errs[1], abs(alt.R1 - base.R1))
    return errs


def invert_period2(store: SpectrumStore, spec: FamilySpec) -> InversionReport:
    """lambda, LE, L_inf, rho, (R0, R1), xi^2, C_phi^s from a tau sigma^n series."""
    if spec.kind != "tau-sigma-n":
        raise InsufficientData("period-two inversion needs a tau-sigma-n family")
    series = deficit_series(store, spec)
    tail = estimate_linfty_lambda(series)
    P = series.prec
    with mp.workprec(P):
        rho = estimate_rho(series, tail.lam, tail.linfty)
        rad = recover_radii(rho.rho, tail.lam, series.L_sigma, rho.spread)
        s1, s0 = spec.sigma
        values = {"lambda": tail.lam, "LE": -mp.log(tail.lam) / 2, "L_inf": tail.linfty,
                  "L_sigma": series.L_sigma, "rho": rho.rho, "rho_reverse": rho.rho_reverse,
                  "R0": rad.R0, "R1": rad.R1,
                  "C_even": tail.amplitude(0), "C_odd": tail.amplitude(1)}
        errors = {"lambda": tail.lam_spread, "LE": tail.lam_spread / (2 * tail.lam),
                  "L_inf": tail.linfty_spread, "rho": rho.spread}
        diag = {"branch": rad.branch, "parity_consistent": tail.parity_consistent,
                "assignment": {"R0": f"bounce on obstacle {s0}", "R1": f"bounce on obstacle {s1}"},
                "candidates": [[_dec(c[0], P), _dec(c[1], P)] for c in rad.candidates],
                "n_range": [min(series.terms), max(series.terms)]}
        if rad.R0 is not None:
            e0, e1 = _radii_errors(rho.rho, rho.spread, tail.lam, tail.lam_spread,
                                   series.L_sigma, rad)
            errors.update({"R0": e0, "R1": e1})
            amp = tail.amplitude(0) if tail.even else tail.amplitude(1)
            inv = recover_invariants(tail.lam, series.L_sigma, rad.R0, rad.R1, amp,
                                     0 if tail.even else 1)
            values.update({"xi_inf_sq": inv.xi2, "xi_inf_sq_corrected": inv.xi2_corrected,
                           "C_phi_s": inv.C_phi_s, "C1_phi_s": inv.C1phi})
            diag["eigenvector_relations"] = {
                "c1s_ratio": _dec(inv.relation_c1s, 64), "square": _dec(inv.relation_sq, 64),
                "linear": _dec(inv.relation_lin, 64)}
        fwd = lambda_from_radii(series.L_sigma, rad.R0, rad.R1) if rad.R0 is not None else None
        if fwd is not None:
            diag["forward_lambda_residual"] = _dec(abs(fwd - tail.lam) / tail.lam, 64)
    return InversionReport("period2", render_word(spec.sigma), render_word(spec.tau),
                           values, errors, diag, P)


def invert_lyapunov(store: SpectrumStore, spec: FamilySpec) -> InversionReport:
    series = deficit_series(store, spec)
    est = lyapunov_from_mls(series)
    with mp.workprec(series.prec):
        values = {"LE": est.le, "lambda": est.lam, "L_inf": est.tail.linfty,
                  "C_even": est.C_even, "C_odd": est.C_odd}
        errors = {"LE": est.le_spread, "lambda": est.tail.lam_spread,
                  "L_inf": est.tail.linfty_spread, "C_even": est.C_even_spread,
                  "C_odd": est.C_odd_spread}
        diag = {"parity_split_resolved": est.parity_split_resolved,
                "parity_consistent": est.tail.parity_consistent,
                "n_range": [min(series.terms), max(series.terms)], "family": spec.kind}
    return InversionReport("lyapunov", render_word(spec.sigma), render_word(spec.tau),
                           values, errors, diag, series.prec)


# -- disc tables ---------------------------------------------------------------------------------

@dataclass
class DiscReconstruction:
    radii: list
    centers: list            # (x, y) pairs, c1 at the origin, c2 on the positive x-axis
    distances: dict          # (i, j) -> center distance, 1-based
    residual: object
    non_eclipse: bool
    clearance: float | None


def _solve_radii(pairs: dict, m: int, tol):
    """Damped Gauss-Newton on 4 (L/2Ri + 1)(L/2Rj + 1) = lam + 2 + 1/lam."""
    keys = sorted(pairs)
    rhs = {k: pairs[k][1] + 2 + 1 / pairs[k][1] for k in keys}
    # start from the symmetric branch of every pair
    guess = [[] for _ in range(m)]
    for (i, j) in keys:
        L, lam = pairs[(i, j)]
        sq = mp.sqrt(lam)
        R = 2 * sq / (1 - sq) ** 2 * L / 2
        guess[i - 1].append(R)
        guess[j - 1].append(R)
    R = [mp.exp(sum(mp.log(g) for g in gs) / len(gs)) for gs in guess]

    def F(R):
        return [4 * (pairs[k][0] / (2 * R[k[0] - 1]) + 1) * (pairs[k][0] / (2 * R[k[1] - 1]) + 1)
                - rhs[k] for k in keys]

    def norm(v):
        return mp.sqrt(sum(x * x for x in v))

    f = F(R)
    for _ in range(200):
        J = mp.zeros(len(keys), m)
        for r, (i, j) in enumerate(keys):
            L = pairs[(i, j)][0]
            ai, aj = L / (2 * R[i - 1]) + 1, L / (2 * R[j - 1]) + 1
            J[r, i - 1] = -4 * aj * L / (2 * R[i - 1] ** 2)
            J[r, j - 1] = -4 * ai * L / (2 * R[j - 1] ** 2)
        JT = J.T
        step = mp.lu_solve(JT * J, JT * mp.matrix(f))
        t = mp.mpf(1)
        while t > mp.mpf(2) ** -30:
            Rn = [R[k] - t * step[k] for k in range(m)]
            if all(x > 0 for x in Rn):
                fn = F(Rn)
                if norm(fn) < norm(f) or norm(fn) < tol:
                    break
            t /= 2
        else:
            break
        R, f = Rn, fn
        if max(abs(t * step[k]) for k in range(m)) < tol * max(R):
            break
    return R, norm(f)


def _third_point(c1, c2, d1, d2):
    """Both intersections of circles |x - c1| = d1 and |x - c2| = d2."""
    dx, dy = c2[0] - c1[0], c2[1] - c1[1]
    D = mp.sqrt(dx * dx + dy * dy)
    a = (d1 ** 2 - d2 ** 2 + D ** 2) / (2 * D)
    h2 = d1 ** 2 - a ** 2
    h = mp.sqrt(h2) if h2 > 0 else mp.mpf(0)
    ex, ey = dx / D, dy / D
    px, py = c1[0] + a * ex, c1[1] + a * ey
    return (px - h * ey, py + h * ex), (px + h * ey, py - h * ex)


def reconstruct_disc_table(pairs: dict, m: int, prec: int = 128) -> DiscReconstruction:
    """Radii and centers (up to isometry) from {(i, j): (L(ij), lam(ij))}."""
    if m < 3:
        raise InsufficientData("disc reconstruction needs m >= 3")
    need = {(i, j) for i, j in combinations(range(1, m + 1), 2)}
    if not need <= set(pairs):
        raise InsufficientData(f"missing pairs {sorted(need - set(pairs))}")
    with mp.workprec(prec):
        pr = {k: (mp.mpf(pairs[k][0]), mp.mpf(pairs[k][1])) for k in need}
        tol = mp.mpf(2) ** (-(prec - 16))
        R, res = _solve_radii(pr, m, tol)
        scale = max(abs(v[1] + 2 + 1 / v[1]) for v in pr.values())
        if res > mp.mpf(10) ** -8 * scale:
            raise InconsistentSystem(f"pairwise equations leave residual {mp.nstr(res, 5)}")
        d = {(i, j): pr[(i, j)][0] / 2 + R[i - 1] + R[j - 1] for (i, j) in need}

        def dist(i, j):
            return d[(min(i, j), max(i, j))]

        C = [(mp.mpf(0), mp.mpf(0)), (dist(1, 2), mp.mpf(0))]
        up, _ = _third_point(C[0], C[1], dist(1, 3), dist(2, 3))
        C.append(up)
        for k in range(4, m + 1):
            cands = _third_point(C[0], C[1], dist(1, k), dist(2, k))
            errs = [abs(mp.sqrt((c[0] - C[2][0]) ** 2 + (c[1] - C[2][1]) ** 2) - dist(3, k))
                    for c in cands]
            C.append(cands[0] if errs[0] <= errs[1] else cands[1])
    ok, clr = True, None
    try:
        from .geometry import disc_table
        t = disc_table([(float(c[0]), float(c[1]), float(r)) for c, r in zip(C, R)])
        clr = t.certificate.min_clearance
    except Exception:
        ok = False
    return DiscReconstruction(R, C, d, res, ok, clr)


def pair_family(i: int, j: int, m: int, ns: Sequence[int], min_precision: int = 64) -> FamilySpec:
    """tau sigma^n family for the pair (i, j) with the smallest admissible tau."""
    tau1 = next(k for k in range(1, m + 1) if k not in (i, j))
    return FamilySpec("tau-sigma-n", (i, j), (tau1,), tuple(ns), min_precision)


def invert_discs(store: SpectrumStore, m: int, ns: Sequence[int], prec: int = 128):
    """Blind disc reconstruction; the store must hold every pair's family."""
    pairs, lam_err = {}, {}
    for i, j in combinations(range(1, m + 1), 2):
        spec = pair_family(i, j, m, ns)
        series = deficit_series(store, spec)
        tail = estimate_linfty_lambda(series)
        pairs[(i, j)] = (series.L_sigma, tail.lam)
        lam_err[(i, j)] = tail.lam_spread
    return reconstruct_disc_table(pairs, m, prec), pairs, lam_err


def procrustes_error(A, B) -> float:
    """Max point distance after the best rigid alignment (reflections allowed)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    a0, b0 = A.mean(axis=0), B.mean(axis=0)
    U, _, Vt = np.linalg.svd((A - a0).T @ (B - b0))
    Rm = U @ Vt
    return float(np.max(np.linalg.norm((A - a0) @ Rm - (B - b0), axis=1)))


# -- forward-side check of the leading deficit term -----------------------------------------------

@dataclass
class LeadingTermReport:
    lam: object
    ell: object
    R0: object
    R1: object
    xi2: object
    C_phi_s: object
    linfty: object
    rows: list            # dicts per n
    slope_q: float    # regression slope of log|D_n - Q-law term|
    slope_corrected: float
    window: tuple


def _slope(ns, vals):
    x = np.array(ns, dtype=float)
    y = np.array([float(mp.log(abs(v))) for v in vals])
    return float(np.polyfit(x, y, 1)[0])


def verify_leading_term(table, sigma=(1, 2), tau1=3, ns=range(0, 17), precision=512,
                     xi_n=40, window=(8, 16)) -> LeadingTermReport:
    """Forward deficits against -ell xi^2 C_phi^s Q(.,.) lam^(n+1).

    Also evaluates the corrected term with Q replaced by (1 + lam)^2.
    """
    from .solver import solve_periodic
    from .symbolic import tau_sigma_n

    ns = list(ns)
    with mp.workprec(precision):
        orb = solve_periodic(table, sigma, precision)
        L = orb.length
        ell = L / 2
        mono = orb.monodromy
        lam = mono.lam
        # radii at the bounce points of sigma = (s1, s0)
        R1 = 1 / orb.jets[0].K0
        R0 = 1 / orb.jets[0].K1
        a = {}
        for n in sorted(set(ns) | {xi_n - 4, xi_n - 2, xi_n}):
            a[n] = solve_periodic(table, tau_sigma_n(sigma, tau1, n), precision).length - (n + 1) * L
        q = (a[xi_n] - a[xi_n - 2]) / (a[xi_n - 2] - a[xi_n - 4])
        linf = a[xi_n] + (a[xi_n] - a[xi_n - 2]) * q / (1 - q)
        # xi_inf from the homoclinic approximant: x(2k) ~ lam^k xi v1^s at the s1 bounces
        h = solve_periodic(table, tau_sigma_n(sigma, tau1, xi_n), precision)
        k = xi_n // 3
        ob = table[sigma[0]]
        ds = ob.s_of_t(h.ts[2 * k], precision) - ob.s_of_t(orb.ts[0], precision)
        per = ob.total_length(precision)
        ds = ds - per * mp.nint(ds / per)
        phi = h.points[2 * k].phi
        a1, a2, DF1, M = period_two_matrices(ell, R1, R0)
        _, v1 = stable_vector(M)
        xi = (ds * v1[0] + phi * v1[1]) / lam ** k
        Cps = 2 * v1[1] ** 2 / ((1 - lam ** 2) * a1)
        X0, X1 = R0 / ell, R1 / ell
        rows = []
        for n in ns:
            D = a[n] - linf
            Q = quadratic_form_Q(X0, X1, lam) if n % 2 == 0 else quadratic_form_Q(X1, X0, lam)
            pred = -ell * xi ** 2 * Cps * Q * lam ** (n + 1)
            corr = -ell * xi ** 2 * Cps * (1 + lam) ** 2 * lam ** (n + 1)
            rows.append({"n": n, "D": D, "pred": pred, "ratio": D / pred,
                         "corrected": corr, "corrected_ratio": D / corr})
        win = [r for r in rows if window[0] <= r["n"] <= window[1]]
        sp = _slope([r["n"] for r in win], [r["D"] - r["pred"] for r in win])
        sc = _slope([r["n"] for r in win], [r["D"] - r["corrected"] for r in win])
    return LeadingTermReport(lam, ell, R0, R1, xi ** 2, Cps, linf, rows, sp, sc, tuple(window))
