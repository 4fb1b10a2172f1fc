import dataclasses
import math

import numpy as np
import pytest

from plapshoot.integrator import reference_propagate
from plapshoot.shooting import (Bracket, ShootingError, ShootSettings, bisect_boundary,
                                certify, classify, scan_transitions, shoot, solve_ladder)
from plapshoot.startup import solve_startup

CI1_FIRST = Bracket(64.62348535570528, 80.7793566946316, 0, 1)


@pytest.mark.parametrize("a", [0.05, 0.5, 2.0])
def test_small_slope_has_no_zero(p1, a):
    c = classify(p1, a)
    assert c.n == 0 and c.n_total == 0 and c.terminal_sign == 1
    # v rises monotonically; the singular forcing lifts it past beta even here
    tr = c.trajectory
    assert np.all(tr.v > 0) and np.all(np.diff(tr.v) > 0)


def test_classify_rejects_out_of_range(p1):
    with pytest.raises(ValueError):
        classify(p1, 0.0)
    with pytest.raises(ValueError):
        classify(p1, 2e6)


def test_shooting_error_wraps_cause(p1):
    with pytest.raises(ShootingError) as info:
        shoot(p1, -1.0)
    assert info.value.a == -1.0


@pytest.mark.parametrize("a", [10.0, 300.0, 3000.0])
def test_count_continuous_in_a(p1, a):
    assert classify(p1, a).n == classify(p1, a * (1 + 1e-9)).n


@pytest.mark.parametrize("name,expected", [
    ("p1", [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 3, 3, 4]),
    ("p2", [0, 0, 1, 1, 2, 3, 5, 7, 10, 14, 19, 28, 39]),
])
def test_count_nondecreasing_under_doubling(name, expected, request):
    pr = request.getfixturevalue(name)
    counts = [classify(pr, 8 * 2 ** k).n_total for k in range(13)]
    assert counts == expected
    assert all(b >= a for a, b in zip(counts[:-1], counts[1:]))


def test_scan_golden_ci1(p1):
    # golden: on [0.1, 100] the count changes once, 0 -> 1, near a = 66.6
    brackets, pts = scan_transitions(p1, 0.1, 100.0, 1.25)
    assert len(pts) == 31
    assert [(b.a_lo, b.a_hi, b.n_lo, b.n_hi, b.status) for b in brackets] == [
        (CI1_FIRST.a_lo, CI1_FIRST.a_hi, 0, 1, "unit")]


def test_scan_brackets_confirmed_by_reference(p1):
    brackets, _ = scan_transitions(p1, 0.5, 2e4, 1.25)
    units = [b for b in brackets if b.status == "unit"]
    assert len(units) >= 3
    for b in units:
        for a, n in ((b.a_lo, b.n_lo), (b.a_hi, b.n_hi)):
            ref = reference_propagate(p1, solve_startup(p1, a))
            assert len(ref.zeros) == n
        assert b.n_hi == b.n_lo + 1


def test_scan_consistent_under_finer_growth(p1):
    coarse, _ = scan_transitions(p1, 0.5, 2e4, 1.25, stop_count=3)
    fine, _ = scan_transitions(p1, 0.5, 2e4, 1.05, stop_count=3)
    c = [b for b in coarse if b.status == "unit"]
    f = [b for b in fine if b.status == "unit"]
    assert [b.n_lo for b in c] == [b.n_lo for b in f]
    for bc, bf in zip(c, f):
        assert bc.a_lo <= bf.a_hi and bf.a_lo <= bc.a_hi


def test_scan_extra_stops_early(p1):
    _, pts = scan_transitions(p1, 0.5, 1e6, 1.25, extra=1)
    assert pts[-1][1] == 2
    assert all(c <= 1 for _, c in pts[:-1])


@pytest.fixture(scope="module")
def first_boundary(p1):
    return bisect_boundary(p1, CI1_FIRST)


def test_bisection_iteration_count(first_boundary):
    res = first_boundary
    w0 = CI1_FIRST.a_hi - CI1_FIRST.a_lo
    assert res.iterations == math.ceil(math.log2(w0 / (1e-10 * res.a_star)))
    assert res.a_hi - res.a_lo <= 1e-10 * res.a_star
    assert not res.flagged


def test_terminal_value_linear_in_width(p1, first_boundary):
    res = first_boundary
    a = res.a_star
    d = 1e-7 * a
    k = (classify(p1, a + d).terminal_v - classify(p1, a - d).terminal_v) / (2 * d)
    assert k != 0
    for width, mid, vT in res.history:
        if width < 1e-3 * a:
            assert vT <= 0.5 * abs(k) * width * 1.05 + 1e-8


def test_boundary_flanks(p1, first_boundary):
    a = first_boundary.a_star
    d = 10 * 1e-10 * a
    s = ShootSettings()
    assert classify(p1, a - d, s).n_total == 0
    assert classify(p1, a + d, s).n_total == 1
    # the new zero enters through T_end
    z = classify(p1, a + d, s).trajectory.zeros[-1].z
    assert p1.T_end - z < 1e-6


def test_certify_rejects_wrong_count(p1, first_boundary):
    c = first_boundary.classification
    assert certify(p1, c, 0)["certified"]
    assert not certify(p1, c, 1)["certified"]
    assert not certify(p1, c, 0, ShootSettings(tol_match=1e-14))["match_ok"]


@pytest.mark.parametrize("name", ["ci1", "ci2"])
def test_ladder_certified_and_increasing(ladder, name):
    lad = ladder(name)
    assert lad.status == "complete" and lad.n0 == 0
    assert sorted(lad.entries) == [0, 1, 2, 3]
    a = lad.a_values()
    assert all(y > x for x, y in zip(a[:-1], a[1:]))
    for n, e in lad.entries.items():
        assert e.certified
        assert e.census.n_zeros == n
        assert abs(e.census.terminal_v) <= 1e-6
        assert abs(e.census.terminal_vprime) >= e.certification["slope_min"] > 0
        assert e.certification["flank_ok"]


def test_ladder_notes_report_n0_caveat(ladder):
    assert any("n0 = 0" in note for note in ladder("ci1").notes)


def test_ladder_deterministic(p1, ladder):
    again = solve_ladder(p1, extra=3)
    assert again.a_values() == ladder("ci1").a_values()


def test_ladder_range_limited(p1):
    lad = solve_ladder(p1, 3, ShootSettings(a_max=2000.0))
    assert lad.status == "range-limited"
    assert sorted(lad.entries) == [0, 1]


def test_solve_ladder_needs_one_target(p1):
    with pytest.raises(ValueError):
        solve_ladder(p1)
    with pytest.raises(ValueError):
        solve_ladder(p1, 3, extra=3)


def test_certify_rejects_slow_zero_crossing(p1, first_boundary):
    import copy
    c = copy.copy(first_boundary.classification)
    c.census = dataclasses.replace(c.census, slope_floor_ok=False)
    assert not certify(p1, c, 0)["certified"]
