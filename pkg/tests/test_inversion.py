import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import coth_mu
from smallball.errors import OutOfRange
from smallball.inversion import eval_phi, eval_rho, invert_mu, invert_phi, mu_at_zero, rho_function, s_max
from smallball.series import eval_mu
from smallball.spectrum import exponential, polynomial


def test_invert_coth_roundtrip(poly2):
    sol = invert_mu(poly2, 1.076674)
    assert sol.theta == pytest.approx(0.5, abs=1e-6)
    assert sol.residual <= 1e-10 * 1.076674
    assert invert_mu(poly2, coth_mu(1.0)).theta == pytest.approx(0.5, rel=1e-9)


@pytest.mark.parametrize("eps", [2.0, 0.0, -1.0])
def test_out_of_range(poly2, eps):
    with pytest.raises(OutOfRange):
        invert_mu(poly2, eps)


def test_mu_zero_is_excluded(poly2):
    with pytest.raises(OutOfRange):
        invert_mu(poly2, mu_at_zero(poly2))


@pytest.mark.parametrize("theta", [0.01, 0.1, 1.0, 10.0, 100.0])
def test_roundtrip(poly2, theta):
    assert invert_mu(poly2, eval_mu(poly2, theta).value).theta == pytest.approx(theta, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(beta=st.floats(1.2, 4.0), log_theta=st.floats(-4, 12))
def test_roundtrip_property(beta, log_theta):
    s = polynomial(beta)
    th = 10.0**log_theta
    sol = invert_mu(s, eval_mu(s, th).value)
    assert sol.theta >= 0
    assert sol.theta == pytest.approx(th, rel=1e-7)


def test_theta_grows(poly2):
    t = [invert_mu(poly2, e).theta for e in (1e-2, 1e-3, 1e-4)]
    assert t[0] < t[1] < t[2]


def test_rho_examples(poly2):
    assert eval_rho(poly2, coth_mu(1.0)) == pytest.approx(2.0, rel=1e-9)
    assert eval_rho(poly2, 1e-3) / 1e-3 < eval_rho(poly2, 1e-2) / 1e-2
    x = 1e-4
    assert eval_rho(poly2, x) == pytest.approx(8 / math.pi**2 * x * x, rel=1e-3)


def test_rho_domain(poly2):
    assert s_max(poly2) < mu_at_zero(poly2)
    with pytest.raises(OutOfRange):
        eval_rho(poly2, mu_at_zero(poly2))
    r = rho_function(poly2)
    assert r.provenance == "inverted-mu"
    assert r(0.01) == eval_rho(poly2, 0.01)


@settings(max_examples=30, deadline=None)
@given(x1=st.floats(1e-6, 1.6), x2=st.floats(1e-6, 1.6))
def test_rho_monotone(x1, x2):
    s = polynomial(2.0)
    lo, hi = sorted((x1, x2))
    assert 0 < eval_rho(s, lo) <= eval_rho(s, hi) * (1 + 1e-12)


def test_phi_examples(poly2):
    assert eval_phi(poly2, 0.0) == 0.0
    assert eval_phi(poly2, 0.5) == pytest.approx(0.538337, abs=1e-6)
    assert invert_phi(poly2, eval_phi(poly2, 2.0)) == pytest.approx(2.0, rel=1e-10)


def test_phi_concave_increasing(poly2):
    ts = [0.1 * 1.5**k for k in range(30)]
    ph = [eval_phi(poly2, t) for t in ts]
    assert all(b > a for a, b in zip(ph, ph[1:]))
    # concavity: slopes of chords decrease
    sl = [(ph[k + 1] - ph[k]) / (ts[k + 1] - ts[k]) for k in range(len(ts) - 1)]
    assert all(b <= a for a, b in zip(sl, sl[1:]))


def test_phi_inverse_negative():
    with pytest.raises(OutOfRange):
        invert_phi(exponential(1.0), -1.0)


def test_phi_inverse_beyond_sup():
    from smallball.inversion import invert_phi_fn

    with pytest.raises(OutOfRange):
        invert_phi_fn(lambda t: t / (1 + t), 2.0)


def test_phi_diverges(poly2):
    vals = [eval_phi(poly2, 10.0**k) for k in range(7)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 1000


@pytest.mark.parametrize("x", [-2, -1, 1, 2])
def test_discrete_self_neglect(poly2, x):
    s = 1e-5
    r = eval_rho(poly2, s)
    assert 0.99 <= eval_rho(poly2, s + x * r) / r <= 1.01
