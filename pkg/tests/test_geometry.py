import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlsb.errors import (ConvexityError, DataIOError, EclipseViolation, PrecisionUnavailable,
                         TableError)
from mlsb.geometry import (BilliardTable, Circle, Ellipse, FourierCurve, arclength_inverse,
                           arclength_param, check_non_eclipse, curvature, disc_table,
                           equilateral_table, eval_point)

ELLIPSE = Ellipse((0, 0), (2, 1))


def ellipse_perimeter(a, b):
    # complete elliptic integral of the second kind, independent of the quadrature tables
    return 4 * a * mp.ellipe(1 - mp.mpf(b) ** 2 / mp.mpf(a) ** 2)


def test_circle_points():
    c = Circle((0, 0), 1)
    x, y = eval_point(c, 0)
    assert (x, y) == (1, 0)
    x, y = eval_point(c, mp.pi, 128)
    assert abs(x + 1) < 1e-35 and abs(y) < 1e-35


def test_ellipse_quarter_perimeter_point():
    with mp.workprec(64):
        q = ellipse_perimeter(2, 1) / 4
    x, y = eval_point(ELLIPSE, q, 64)
    assert math.hypot(float(x), float(y) - 1) < 1e-12


def test_ellipse_total_length():
    with mp.workprec(128):
        ref = ellipse_perimeter(2, 1)
    assert abs(ELLIPSE.total_length(128) - ref) < mp.mpf(10) ** -33
    assert abs(float(ELLIPSE.total_length(64)) - 9.688448220547675) < 1e-13


def test_curvature_examples():
    with mp.workprec(64):
        assert curvature(Circle((1, 2), 2.5), 0.7) == mp.mpf(1) / mp.mpf("2.5")
    with mp.workprec(64):
        q = ellipse_perimeter(2, 1) / 4
    assert abs(curvature(ELLIPSE, 0, 64) - 2) < 1e-15
    assert abs(curvature(ELLIPSE, q, 64) - mp.mpf("0.25")) < 1e-15


def test_circle_arclength_linear():
    c = Circle((0, 0), 3)
    with mp.workprec(128):
        for t in ("0.1", "1.0", "2.5"):
            t = mp.mpf(t)
            assert abs(arclength_param(c, t, 128) - 3 * t) < mp.mpf(10) ** -35


@pytest.mark.parametrize("ob", [ELLIPSE, FourierCurve((0, 0), 1, cos=[0, 0.05], sin=[0.03])])
def test_arclength_periodic_and_inverse(ob):
    for prec in (64, 256):
        with mp.workprec(prec):
            ell = ob.total_length(prec)
            for t in (mp.mpf("0.3"), mp.mpf("2.9"), mp.mpf("5.5")):
                s = arclength_param(ob, t, prec)
                assert abs(arclength_param(ob, t + 2 * mp.pi, prec) - (s + ell)) < mp.mpf(2) ** (-prec + 8)
                assert abs(arclength_inverse(ob, s, prec) - t) < mp.mpf(2) ** (-prec + 8)


def test_arclength_against_direct_quadrature():
    with mp.workprec(128):
        t = mp.mpf("1.234")
        ref = mp.quad(lambda u: mp.sqrt(4 * mp.sin(u) ** 2 + mp.cos(u) ** 2), [0, t])
        assert abs(arclength_param(ELLIPSE, t, 128) - ref) < mp.mpf(10) ** -33


def test_precision_unavailable():
    with pytest.raises(PrecisionUnavailable):
        arclength_param(ELLIPSE, 0.5, 5000)


obstacles = st.sampled_from([
    Circle((0, 0), 1.3), Ellipse((1, -1), (2, 1), 0.4), Ellipse((0, 0), (1.5, 1.4), -1.0),
    FourierCurve((0, 0), 1, cos=[0, 0.05], sin=[0.03]), FourierCurve((2, 1), 1.2, cos=[0.04, 0, 0.02])])


@settings(max_examples=40, deadline=None)
@given(obstacles, st.floats(0, 1))
def test_finite_difference_curvature(ob, u):
    with mp.workprec(128):
        ell = ob.total_length(128)
        s = ell * mp.mpf(u)
        h = mp.mpf(10) ** -8
        p = [mp.matrix(eval_point(ob, s + k * h, 128)) for k in (-1, 0, 1)]
        d1 = (p[2] - p[0]) / (2 * h)
        d2 = (p[2] - 2 * p[1] + p[0]) / h ** 2
        k_fd = d1[0] * d2[1] - d1[1] * d2[0]
        k = curvature(ob, s, 128)
        assert k > 0
        assert abs(k_fd - k) < 1e-10
        # unit speed in arclength
        assert abs(mp.norm(d1) - 1) < 1e-12
        assert max(abs(a - b) for a, b in zip(eval_point(ob, s + ell, 128), eval_point(ob, s, 128))) < 1e-30


def test_equilateral_clearance():
    cert = check_non_eclipse(equilateral_table())
    assert abs(cert.min_clearance - (3 * math.sqrt(3) - 2)) < 1e-9


def test_collinear_discs_fail_on_middle():
    with pytest.raises(EclipseViolation) as e:
        disc_table([(0, 0, 1), (4, 0, 1), (8, 0, 1)])
    assert e.value.k == 2 and (e.value.i, e.value.j) == (1, 3)


def test_two_disc_table_has_no_certificate():
    t = disc_table([(0, 0, 1), (4, 0, 1)])
    with pytest.raises(TableError):
        check_non_eclipse(t)


def test_overlap_and_nonconvex_rejected():
    with pytest.raises(TableError):
        disc_table([(0, 0, 1), (1, 0, 1), (0, 5, 1)])
    with pytest.raises(ConvexityError):
        FourierCurve((0, 0), 1, cos=[0, 0, 0.2])


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-10, 10), st.floats(-10, 10))
def test_certificate_rigid_motion_invariant(theta, dx, dy):
    base = [(0, 0, 1), (6, 0, 1.5), (3, 5.5, 1)]
    c, s = math.cos(theta), math.sin(theta)
    moved = [(c * x - s * y + dx, s * x + c * y + dy, r) for x, y, r in base]
    a = check_non_eclipse(disc_table(base)).min_clearance
    b = check_non_eclipse(disc_table(moved)).min_clearance
    assert abs(a - b) < 1e-9


def test_json_round_trip(tmp_path):
    t = BilliardTable([Circle((0, 0), 1), Ellipse((6, 0), (1.5, 0.8), 0.3),
                       FourierCurve((3, 5.5), 1, cos=[0, 0.05], sin=[0.03])])
    p = tmp_path / "t.json"
    t.save(p)
    u = BilliardTable.load(p)
    assert u.sha256() == t.sha256() and u.to_json() == t.to_json()
    eq = equilateral_table()
    with mp.workprec(200):
        assert eq[3].center[1] == 3 * mp.sqrt(3)


def test_load_errors(tmp_path):
    with pytest.raises(DataIOError):
        BilliardTable.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(DataIOError):
        BilliardTable.load(bad)
    bad.write_text('{"obstacles": [{"kind": "square"}]}')
    with pytest.raises(TableError):
        BilliardTable.load(bad)
