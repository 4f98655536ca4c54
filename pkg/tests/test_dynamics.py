import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import asym_table
from mlsb.dynamics import (Escape, PhasePoint, billiard_step, bounce_point, chord,
                           differential, free_flight, jet2_chord, monodromy, reverse,
                           segment_jet)
from mlsb.errors import GrazingDegenerate, NoIntersection, NonHyperbolic
from mlsb.geometry import equilateral_table
from mlsb.solver import solve_periodic

EQ = equilateral_table()
ASYM = asym_table()


def test_chord_examples(two_disc):
    with mp.workprec(64):
        assert chord(two_disc, 1, 0, 2, mp.pi, 64) == 2
        a = chord(two_disc, 1, 0.3, 2, 2.0, 64)
        b = chord(two_disc, 2, 2.0, 1, 0.3, 64)
        assert a == b
    # facing points of discs 1 and 2 on the equilateral table
    with mp.workprec(128):
        assert abs(chord(EQ, 1, 0, 2, mp.pi, 128) - 4) < mp.mpf(10) ** -35


def test_step_perpendicular(two_disc):
    with mp.workprec(128):
        q = billiard_step(two_disc, PhasePoint(1, mp.mpf(0), mp.mpf(0)), 2, 128)
        assert q.i == 2 and abs(q.s - mp.pi) < mp.mpf(10) ** -35 and abs(q.phi) < mp.mpf(10) ** -35
        with pytest.raises(NoIntersection):
            billiard_step(two_disc, PhasePoint(1, mp.mpf(0), mp.pi / 2), 2, 128)


def test_launch_between_discs_escapes():
    # disc 3 sits above the gap between discs 1 and 2; the vertical ray x = 3
    # stays at distance 3 > 1 from both centers
    with mp.workprec(64):
        p = PhasePoint(3, 3 * mp.pi / 2, mp.mpf(0))
        for j in (1, 2):
            with pytest.raises(NoIntersection):
                billiard_step(EQ, p, j, 64)
        assert isinstance(free_flight(EQ, p, 64), Escape)


def test_free_flight_examples(two_disc):
    with mp.workprec(64):
        q = free_flight(two_disc, PhasePoint(1, mp.mpf(0), mp.mpf(0)), 64)
        assert q.i == 2
        assert isinstance(free_flight(two_disc, PhasePoint(1, mp.pi, mp.mpf(0)), 64), Escape)


def _oracle_first_hit(table, p, v, skip):
    best, who = math.inf, None
    for k in range(1, table.m + 1):
        if k == skip:
            continue
        c = table[k].center_f
        r = float(table[k].radius)
        w = p - c
        b = w @ v
        disc = b * b - (w @ w - r * r)
        if disc <= 1e-9:
            continue
        d = -b - math.sqrt(disc)
        if 1e-9 < d < best:
            best, who = d, k
    return who


phase = st.tuples(st.integers(1, 3), st.floats(0, 2 * math.pi), st.floats(-1.5, 1.5))


@settings(max_examples=80, deadline=None)
@given(phase)
def test_free_flight_matches_ray_oracle(x):
    i, s, phi = x
    table = ASYM
    with mp.workprec(64):
        ob = table[i]
        r = float(ob.radius)
        pt = PhasePoint(i, mp.mpf(s) * r, mp.mpf(phi))
        bp = bounce_point(ob, ob.t_of_s(pt.s))
        n = np.array([float(bp.nx), float(bp.ny)])
        t = np.array([float(bp.tx), float(bp.ty)])
        v = math.cos(phi) * n + math.sin(phi) * t
        expect = _oracle_first_hit(table, np.array([float(bp.x), float(bp.y)]), v, i)
        got = free_flight(table, pt, 64)
    if expect is None:
        assert isinstance(got, Escape)
    else:
        assert not isinstance(got, Escape) and got.i == expect


def aimed(table, i, u, j, w, prec=128):
    """Phase point on obstacle i (angle u) whose ray passes through obstacle j's point at angle w."""
    with mp.workprec(prec):
        a = bounce_point(table[i], mp.mpf(u))
        c = table[j].frame(mp.mpf(w))
        dx, dy = c[0] - a.x, c[1] - a.y
        phi = mp.atan2(dx * a.tx + dy * a.ty, dx * a.nx + dy * a.ny)
        return PhasePoint(i, table[i].s_of_t(mp.mpf(u), prec), phi)


aims = st.tuples(st.integers(1, 3), st.floats(0, 2 * math.pi), st.integers(1, 2),
                 st.floats(0, 2 * math.pi))


@settings(max_examples=60, deadline=None)
@given(aims)
def test_time_reversal(x):
    i, u, dj, w = x
    j = (i - 1 + dj) % 3 + 1
    with mp.workprec(128):
        pt = aimed(ASYM, i, u, j, w)
        assume(abs(pt.phi) < 1.5)
        y = free_flight(ASYM, pt, 128)
        assume(not isinstance(y, Escape) and abs(y.phi) < 1.5)
        back = free_flight(ASYM, reverse(y), 128)
        assert back.i == i
        per = ASYM[i].total_length(128)
        ds = back.s - pt.s
        assert abs(ds - per * mp.nint(ds / per)) < mp.mpf(10) ** -30
        assert abs(back.phi + pt.phi) < mp.mpf(10) ** -30


def _jet(table, x, prec):
    y = free_flight(table, x, prec)
    a = bounce_point(table[x.i], table[x.i].t_of_s(x.s, prec))
    b = bounce_point(table[y.i], table[y.i].t_of_s(y.s, prec))
    return y, segment_jet(a, b)


@pytest.mark.parametrize("x", [(2, 3.0, 1, 0.2), (3, 4.4, 1, 0.9), (1, 0.4, 2, 3.5), (1, 1.0, 3, 4.5)])
def test_differential_matches_finite_differences(x):
    prec = 128
    with mp.workprec(prec):
        p = aimed(ASYM, *x, prec=prec)
        y, jet = _jet(ASYM, p, prec)
        D = differential(jet)
        h = mp.mpf(10) ** -12
        for col, (ds, dp) in enumerate(((h, 0), (0, h))):
            fp = billiard_step(ASYM, PhasePoint(p.i, p.s + ds, p.phi + dp), y.i, prec)
            fm = billiard_step(ASYM, PhasePoint(p.i, p.s - ds, p.phi - dp), y.i, prec)
            col_fd = [(fp.s - fm.s) / (2 * h), (fp.phi - fm.phi) / (2 * h)]
            for row in range(2):
                assert abs(col_fd[row] - D[row, col]) < 1e-15 * max(1, abs(D[row, col]))
        # determinant is cos(phi) / cos(phi')
        assert abs(mp.det(D) - jet.cos0 / jet.cos1) < mp.mpf(10) ** -30


def test_differential_examples(two_disc):
    o = solve_periodic(two_disc, (1, 2), 128)
    assert mp.norm(differential(o.jets[0]) + mp.matrix([[3, 2], [4, 3]])) < mp.mpf(10) ** -30
    e = solve_periodic(EQ, (1, 2), 128)
    with mp.workprec(128):
        D = differential(e.jets[0])
        assert mp.norm(D + mp.matrix([[5, 4], [6, 5]])) < mp.mpf(10) ** -30
        assert abs(mp.det(D) - 1) < mp.mpf(10) ** -30


def test_grazing_flagged():
    from mlsb.dynamics import JetAtBounce
    with pytest.raises(GrazingDegenerate):
        differential(JetAtBounce(mp.mpf(2), mp.mpf(1), mp.mpf(1), mp.mpf(1), mp.mpf("1e-9")))


def test_monodromy_examples(two_disc):
    with mp.workprec(128):
        e = solve_periodic(EQ, (1, 2), 128).monodromy
        assert mp.norm(e.matrix - mp.matrix([[49, 40], [60, 49]])) < mp.mpf(10) ** -28
        assert abs(e.lam - (49 - 20 * mp.sqrt(6))) < mp.mpf(10) ** -35
        t = solve_periodic(two_disc, (1, 2), 128).monodromy
        assert abs(t.lam - (17 - 12 * mp.sqrt(2))) < mp.mpf(10) ** -35
        assert abs(t.le + mp.log(17 - 12 * mp.sqrt(2)) / 2) < mp.mpf(10) ** -35


@pytest.mark.parametrize("word", [(1, 2, 3), (3, 2, 1, 2), (1, 2, 1, 3, 2, 3), (1, 3, 2, 3, 2, 1, 2)])
def test_monodromy_det_and_rotation(word):
    o = solve_periodic(ASYM, word, 128)
    with mp.workprec(128):
        M = o.monodromy
        assert abs(mp.det(M.matrix) - 1) < mp.mpf(10) ** -25
        assert abs(M.lam * M.mu - 1) < mp.mpf(10) ** -30
        r = solve_periodic(ASYM, word[1:] + word[:1], 128).monodromy
        assert abs(r.trace - M.trace) < mp.mpf(10) ** -25 * abs(M.trace)


def test_non_hyperbolic_flag():
    from mlsb.dynamics import JetAtBounce
    # a flat-mirror segment (zero curvature) has trace exactly 2
    flat = JetAtBounce(mp.mpf(2), mp.mpf(0), mp.mpf(0), mp.mpf(1), mp.mpf(1))
    with pytest.raises(NonHyperbolic):
        monodromy([flat, flat])


def test_jet_zeta_examples(two_disc):
    with mp.workprec(64):
        j = jet2_chord(two_disc, (1, 0, 2, mp.pi), (mp.mpf("0.01"), mp.pi + mp.mpf("0.02")))
        assert abs(j.zeta_minus - 0.5) < 1e-15 and abs(j.zeta_plus - 0.5) < 1e-15
        assert abs(j.first_order) < 1e-15
        e = jet2_chord(EQ, (1, 0, 2, mp.pi), (mp.mpf("0.01"), mp.pi))
        assert abs(e.zeta_minus - 0.25) < 1e-15 and abs(e.zeta_plus - 0.25) < 1e-15


def remainder_slope(table, x, direction, variables, prec=256):
    i, s, j, s2 = x
    epss = [mp.mpf(10) ** (-k / 2) for k in range(4, 9)]
    logs = []
    with mp.workprec(prec):
        for e in epss:
            jt = jet2_chord(table, x, (s + e * direction[0], s2 + e * direction[1]), prec, variables)
            logs.append(float(mp.log(abs(jt.remainder))))
    return float(np.polyfit([float(mp.log(e)) for e in epss], logs, 1)[0])


def test_reflection_variables_are_only_first_order_accurate():
    # the literal reflection-angle form leaves a remainder far from cubic
    x = (1, mp.mpf("0.4"), 2, mp.mpf("2.9"))
    s_osc = remainder_slope(ASYM, x, (1, 0.7), "osculating")
    s_ref = remainder_slope(ASYM, x, (1, 0.7), "reflection")
    assert s_osc >= 2.9
    assert s_ref < 2.5
