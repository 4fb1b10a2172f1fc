import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plapshoot.model import phi_inv
from plapshoot.startup import (RATIO_MAX, StartupError, consistency_gap, epsilon_candidates,
                               leading_order_slope, pick_epsilon, picard_solve,
                               singular_moment, singular_moment_reference, solve_startup)

A_GRID = (0.5, 1.0, 2.0, 8.0, 32.0)


def test_ci1_unit_slope_golden(p1):
    res = solve_startup(p1, 1.0)
    # golden after the first verified run: fourth halving of T_end / 4
    assert res.epsilon == 0.015625
    assert res.contraction_estimate <= RATIO_MAX
    assert res.picard_residual <= 1e-10


def test_candidates_are_halvings(p1):
    c = epsilon_candidates(p1, 10)
    assert c[0] == p1.T_end / 4
    assert all(b == a / 2 for a, b in zip(c[:-1], c[1:]))


def test_nonpositive_slope_rejected(p1):
    with pytest.raises(StartupError):
        pick_epsilon(p1, 0.0)


@pytest.mark.parametrize("a", A_GRID)
@pytest.mark.parametrize("name", ["p1", "p2"])
def test_startup_certificate(name, a, request):
    pr = request.getfixturevalue(name)
    res = solve_startup(pr, a)
    assert res.contraction_estimate <= RATIO_MAX
    assert res.picard_residual <= 1e-10
    assert res.ball_ok()
    assert np.all(res.w >= a / 2) and np.all(res.w <= 1.5 * a)
    assert a / 2 * res.epsilon <= res.v_eps <= 1.5 * a * res.epsilon
    assert res.q_eps > a ** (pr.p - 1)
    assert consistency_gap(pr, res) <= 1e-9 * max(1.0, abs(res.vprime_eps))
    assert float(res.w_at(0.0)[0]) == pytest.approx(a, rel=1e-13)


@pytest.mark.parametrize("a", A_GRID)
def test_leading_order_slope(p1, a):
    res = solve_startup(p1, a)
    assert leading_order_slope(res) == pytest.approx(0.25, rel=0.02)


def test_leading_order_amplitude(p1):
    # q - a^(p-1) ~ a^-m t^(1-at-m) / (1-at-m) = 4 t^(1/4) at a = 1
    res = solve_startup(p1, 1.0)
    t = 1e-8
    qe = float(res.q_excess_at(t)[0])
    assert qe == pytest.approx(0.04, rel=0.01)


def test_v_over_eps_tends_to_a(p1):
    a = 1.0
    devs = [abs(picard_solve(p1, a, e).v_eps / e - a)
            for e in epsilon_candidates(p1, 100)[::10]]
    assert all(d2 < d1 for d1, d2 in zip(devs[:-1], devs[1:]))
    assert devs[-1] <= 1e-6 * a


def test_epsilon_monotone_in_a_with_recorded_exceptions(p1, p2):
    # eps rises with a while the contraction constant, which scales like
    # a^-(p+m-1), dominates; once the locality cap v(eps) <= beta/4 binds,
    # doubling a never increases eps. The rising part is the recorded exception.
    expected_ups = {"ci1": [0.5, 1.0], "ci2": [0.5]}
    for name, pr in (("ci1", p1), ("ci2", p2)):
        a = [0.5 * 2 ** k for k in range(12)]
        eps = [pick_epsilon(pr, x) for x in a]
        ups = [a[i] for i in range(len(a) - 1) if eps[i + 1] > eps[i]]
        assert ups == expected_ups[name]
        peak = int(np.argmax(eps))
        assert all(e2 <= e1 for e1, e2 in zip(eps[peak:-1], eps[peak + 1:]))


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.1, 100.0), c=st.floats(-0.45, 0.45), k=st.floats(0.0, 6.0),
       t=st.floats(1e-6, 0.1))
def test_singular_moment_matches_brute_force(p1, a, c, k, t):
    w = lambda x: a * (1 + c * np.sin(k * x / t))
    got = singular_moment(p1, t, w)
    ref = singular_moment_reference(p1, t, w, 1e-14 * t)
    assert got == pytest.approx(ref, rel=1e-10)


def test_stability_in_a(p1, p2):
    for pr in (p1, p2):
        r1 = solve_startup(pr, 4.0)
        r2 = solve_startup(pr, 4.0 * (1 + 1e-8))
        assert r1.epsilon == r2.epsilon
        assert abs(r2.v_eps - r1.v_eps) <= 1e-6 * abs(r1.v_eps)
        assert abs(r2.q_eps - r1.q_eps) <= 1e-6 * abs(r1.q_eps)


def test_derivative_consistency(p2):
    res = solve_startup(p2, 8.0)
    assert phi_inv(res.q_eps, p2.p) == pytest.approx(res.vprime_eps, rel=1e-9)
