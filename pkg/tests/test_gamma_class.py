import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smallball.asymptotics import dmz_log_function
from smallball.errors import DomainError, LeavesDomain, NonPositivePhi, NotRegularlyVarying, QuadratureFailure
from smallball.gamma_class import (
    bump_density,
    build_self_neglect_repr,
    estimate_aux,
    flatness_probe,
    gamma_membership_check,
    probe_regular_variation,
    reconstruct_spectrum,
    self_neglect_check,
    step_sequence,
)
from smallball.inversion import AuxFunction, eval_rho
from smallball.spectrum import polynomial


def exp_inv(k=1.0):
    return lambda s: -(s ** -k) if s > 0 else -math.inf


def sq(t):
    return t * t


# membership


def test_membership_example():
    rep = gamma_membership_check(exp_inv(), sq, [0.01], [1.0])
    assert rep.ratios[0][0] == pytest.approx(math.exp(1 / 0.01 - 1 / 0.0101), rel=1e-13)
    assert rep.ratios[0][0] == pytest.approx(2.69150, abs=1e-5)
    assert rep.max_rel_error[0] == pytest.approx(0.0099, abs=2e-4)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(1e-4, 0.5), xs=st.lists(st.floats(-3, 3), min_size=1, max_size=4))
def test_membership_x0_and_null(s, xs):
    rep = gamma_membership_check(exp_inv(), sq, [s], [0.0] + xs)
    assert rep.ratios[0][0] == 1.0
    for x, r in zip(xs, rep.ratios[0][1:]):
        if s + x * s * s <= 0:
            assert r == 0.0


def test_membership_null_region():
    rep = gamma_membership_check(exp_inv(), lambda s: 10 * s, [0.05], [-1.0])
    assert rep.ratios[0][0] == 0.0
    assert rep.max_rel_error[0] == 1.0


def test_membership_fails_for_power():
    rep = gamma_membership_check(lambda s: 2 * math.log(s), sq, [1e-2, 1e-3, 1e-4], [-1.0, 1.0])
    assert rep.verdict == "fail"


def test_membership_passes_exp_inv():
    rep = gamma_membership_check(exp_inv(), sq, [1e-2, 1e-3, 1e-4], [-1.0, 1.0, 2.0])
    assert rep.verdict == "pass"
    assert rep.s_grid == [1e-2, 1e-3, 1e-4]
    assert rep.targets == pytest.approx([math.exp(-1), math.e, math.exp(2)])


def test_membership_verdict_agrees_with_estimated_aux():
    F = exp_inv()
    grid = [1e-2, 1e-3, 1e-4]
    a = gamma_membership_check(F, sq, grid, [-1.0, 1.0])
    b = gamma_membership_check(F, lambda s: estimate_aux(F, s), grid, [-1.0, 1.0])
    assert a.verdict == b.verdict == "pass"


def test_verdict_rules():
    from smallball.gamma_class import _verdict

    assert _verdict([0.01, 0.02, 0.01], 0.05) == "inconclusive"
    assert _verdict([0.3, 0.2, 0.1], 0.05) == "inconclusive"
    assert _verdict([0.1, 0.2, 0.3], 0.05) == "fail"
    assert _verdict([0.3, 0.1, 0.04], 0.05) == "pass"


def test_membership_bad_rho():
    with pytest.raises(DomainError):
        gamma_membership_check(exp_inv(), lambda s: 0.0, [0.1], [1.0])


# self-neglect


def test_self_neglect_examples():
    rep = self_neglect_check(sq, [0.01], [0.0, 1.0])
    assert rep.ratios[0] == [1.0, pytest.approx(1.0201, rel=1e-13)]
    lin = self_neglect_check(lambda s: s, [1e-2, 1e-3, 1e-4], [1.0, 2.0])
    assert lin.ratios[-1] == pytest.approx([2.0, 3.0])
    assert lin.verdict == "fail"
    assert self_neglect_check(sq, [1e-2, 1e-3, 1e-4], [-1.0, 1.0]).verdict == "pass"


def test_self_neglect_domain():
    with pytest.raises(DomainError):
        self_neglect_check(lambda s: s, [0.1], [-2.0])


def test_rho_of_spectrum_self_neglecting(poly2):
    rep = self_neglect_check(lambda s: eval_rho(poly2, s), [1e-3, 1e-4, 1e-5], [-2.0, -1.0, 1.0, 2.0])
    assert rep.verdict == "pass"


# auxiliary estimate


@pytest.mark.parametrize("s", [1e-2, 1e-3])
def test_estimate_aux_exp_inv(s):
    # int_0^s e^{-1/t} dt = s^2 e^{-1/s} (1 - 2 s + 6 s^2 - ...)
    r = estimate_aux(exp_inv(), s) / (s * s)
    assert r == pytest.approx(1 - 2 * s + 6 * s * s, abs=30 * s**3)


@pytest.mark.parametrize("d", [1.0, 2.0, 3.5])
def test_estimate_aux_power(d):
    for s in (0.5, 1e-3):
        assert estimate_aux(lambda t: d * math.log(t), s) == pytest.approx(s / (d + 1), rel=1e-9)


def test_estimate_aux_edge(poly2):
    with pytest.raises(QuadratureFailure):
        estimate_aux(dmz_log_function(poly2), 1.7)


# flatness


def test_flatness_example():
    fl = flatness_probe(exp_inv(), 6, [0.01])
    assert fl.ratio(6, 0) == pytest.approx(math.exp(-100) / 1e-12, rel=1e-12)
    assert fl.ratio(6, 0) == pytest.approx(3.7e-32, rel=0.01)


def test_flatness_power_flagged():
    fl = flatness_probe(lambda s: 3 * math.log(s), 4, [1e-2, 1e-3, 1e-4])
    assert fl.decreasing[:3] == [True, True, True]
    assert fl.decreasing[4] is False
    assert fl.ratio(4, 2) == pytest.approx(1e4, rel=1e-12)


def test_flatness_exp_inv_all_orders():
    fl = flatness_probe(exp_inv(), 8, [1e-2, 1e-3, 1e-4])
    assert all(fl.decreasing)


@pytest.mark.parametrize("k", [1.0, 2.0])
def test_dichotomy(k):
    F, s = exp_inv(k), 1e-2
    assert F(2 * s) - F(s) > math.log(1e3)
    assert F(s / 2) - F(s) < math.log(1e-3)


# converse construction


def test_reconstruct_square():
    C = 1.7
    spec = reconstruct_spectrum(sq, C, 200)
    i = np.arange(1, 201)
    assert spec.a_sq(i) == pytest.approx(C * i.astype(float) ** 2, rel=1e-10)
    assert spec.tail_model.kind == "power"
    assert spec.tail_model.exponent == pytest.approx(2.0, rel=1e-8)


def test_reconstruct_rejects_linear():
    with pytest.raises(NotRegularlyVarying):
        reconstruct_spectrum(lambda t: t, 1.0, 100)


def test_probe():
    p = probe_regular_variation(sq, 1e-2)
    assert p.stable and p.vanishing
    assert p.slopes == pytest.approx([2.0, 2.0])
    q = probe_regular_variation(lambda t: t, 1e-2)
    assert not q.vanishing


def test_step_sequence_square():
    xs = step_sequence(sq, 0.5, 3)
    assert xs[1:] == pytest.approx([0.25, 0.1875, 0.15234375], rel=1e-15)


@settings(max_examples=30, deadline=None)
@given(x0=st.floats(0.01, 0.99), n=st.integers(1, 300))
def test_step_sequence_property(x0, n):
    xs = step_sequence(sq, x0, n)
    assert np.all(xs > 0) and np.all(np.diff(xs) < 0)


def test_step_sequence_leaves_domain():
    with pytest.raises(LeavesDomain):
        step_sequence(lambda t: 1.0, 0.5, 10)


# representation


def test_bump_density_normalised():
    from scipy import integrate

    mass, _ = integrate.quad(bump_density, 0, 1, epsabs=1e-13)
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert bump_density(0.0) == bump_density(1.0) == 0.0


def test_repr_identity_and_decay():
    rep = build_self_neglect_repr(sq, sq, 0.5)
    assert float(rep.identity_errors().max()) <= 1e-10
    m = rep.epsilon_values[-10:]
    assert all(b < a for a, b in zip(m, m[1:]))
    assert rep.rho_check == "pass"


def test_repr_constant_phi():
    rep = build_self_neglect_repr(lambda t: 1.0, sq, 0.5)
    assert max(rep.epsilon_values) == 0.0


def test_repr_planted_epsilon():
    # eps0(u) = u and rho = u^2 give phi(x) = exp(int_x^1 du/u) = 1/x
    rep = build_self_neglect_repr(lambda t: 1.0 / t, sq, 0.5)
    assert float(rep.identity_errors().max()) <= 1e-10
    m = rep.epsilon_values
    assert m[-1] < 0.1 * m[0]
    assert all(b < a for a, b in zip(m[-10:], m[-9:]))


def test_repr_errors():
    with pytest.raises(NonPositivePhi):
        build_self_neglect_repr(lambda t: -1.0, sq, 0.5)
    with pytest.raises(DomainError):
        build_self_neglect_repr(sq, sq, 1.5)
    with pytest.raises(LeavesDomain):
        build_self_neglect_repr(sq, lambda t: 1.0, 0.5)
