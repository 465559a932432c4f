import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paraweight.errors import DomainError, EvaluationError, WeightDomainError
from paraweight.modulus import (
    Modulus,
    adaptive_simpson,
    build_weight,
    check_weight_ode,
    get_modulus,
    osgood_tail,
    osgood_verdict,
    validate_modulus,
)


@pytest.fixture(scope="module")
def lip_weight():
    return build_weight(get_modulus("lip"), 10.0)


@pytest.fixture(scope="module")
def loglip_weight():
    return build_weight(get_modulus("loglip"), 6.0)


@pytest.mark.parametrize("name", ["lip", "sqrt", "loglip", "holder:0.3", "holder:1"])
def test_catalogue_moduli_validate(name):
    rep = validate_modulus(get_modulus(name))
    assert rep.passed, rep.violations


def test_identity_modulus_meets_lower_bound_with_equality():
    mu = get_modulus("lip")
    s = np.linspace(0, 1, 1025)
    assert np.array_equal(mu(s), s)


def test_square_is_rejected_for_both_reasons():
    rep = validate_modulus(lambda s: s**2)
    assert not rep.passed
    assert {"concave", "mu(s)>=s"} <= rep.properties()
    for v in rep.violations:
        assert np.all((np.asarray(v.point) >= 0) & (np.asarray(v.point) <= 1))


def test_endpoint_violations_reported():
    rep = validate_modulus(lambda s: 0.5 * np.sqrt(s) + 0.1)
    assert {"mu(0)=0", "mu(1)=1"} <= rep.properties()


def test_non_finite_sample_names_the_point():
    with pytest.raises(EvaluationError, match="s = "):
        validate_modulus(lambda s: np.where(s > 0.5, np.nan, s))


def test_unknown_modulus():
    with pytest.raises(DomainError):
        get_modulus("cubic")
    with pytest.raises(DomainError):
        get_modulus("holder:1.5")


def test_normalized_rescales_to_unit():
    raw = Modulus("twice", lambda s: 2 * np.sqrt(s), lambda d: (1 - math.sqrt(d)))
    mu = raw.normalized()
    assert mu(1.0) == pytest.approx(1.0)
    assert mu.analytic_tail(0.25) == pytest.approx(2 * 0.5)


@pytest.mark.parametrize(
    "name,delta,expected",
    [
        ("lip", math.exp(-1), 1.0),
        ("sqrt", 0.01, 1.8),
        ("loglip", math.exp(1 - math.e), 1.0),
    ],
)
def test_osgood_tail_closed_forms(name, delta, expected):
    assert osgood_tail(get_modulus(name), delta) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("name", ["lip", "sqrt", "loglip", "holder:0.7"])
def test_osgood_tail_against_analytic_tail(name):
    mu = get_modulus(name)
    for d in (0.5, 1e-3, 1e-9, 1e-40):
        assert osgood_tail(mu, d) == pytest.approx(mu.analytic_tail(d), rel=1e-9)


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.2, 2.0])
def test_osgood_tail_domain(delta):
    with pytest.raises(DomainError):
        osgood_tail(get_modulus("lip"), delta)


@given(st.floats(1e-12, 0.99), st.floats(1e-12, 0.99))
@settings(max_examples=40, deadline=None)
def test_osgood_tail_monotone_in_delta(a, b):
    lo, hi = sorted((a, b))
    mu = get_modulus("loglip")
    assert osgood_tail(mu, lo) >= osgood_tail(mu, hi) - 1e-12


def test_adaptive_simpson_polynomial():
    assert adaptive_simpson(lambda x: x**3 - x, 0.0, 2.0, 1e-12, 1e-14) == pytest.approx(2.0, rel=1e-12)


def test_verdicts_on_decimal_sequence():
    deltas = [10.0**-j for j in range(1, 9)]
    assert osgood_verdict(get_modulus("lip"), deltas).verdict == "diverges"
    assert osgood_verdict(get_modulus("sqrt"), deltas).verdict == "converges"


def test_verdict_loglip_default_sequence():
    v = osgood_verdict(get_modulus("loglip"))
    assert v.verdict == "diverges"
    assert np.all(np.diff(v.tails) > 0)


def test_verdict_rejects_short_or_unsorted_sequences():
    with pytest.raises(DomainError):
        osgood_verdict(get_modulus("lip"), [0.5, 0.1, 0.01])
    with pytest.raises(DomainError):
        osgood_verdict(get_modulus("lip"), [0.5, 0.1, 0.2, 0.01, 0.001, 1e-4])


def test_lip_weight_closed_form(lip_weight):
    tau = np.linspace(0, 10, 2001)
    exact = np.expm1(tau)
    rel = np.abs(lip_weight.Phi(tau) - exact) / np.maximum(exact, 1e-300)
    assert np.max(rel[1:]) <= 1e-8
    assert np.max(np.abs(lip_weight.Phi_prime(tau) / np.exp(tau) - 1)) <= 1e-8


@pytest.mark.parametrize("fixture", ["lip_weight", "loglip_weight"])
def test_weight_start_values(fixture, request):
    w = request.getfixturevalue(fixture)
    assert w.Phi(0.0) == 0.0
    assert w.Phi_prime(0.0) == 1.0
    assert w.phi(1.0) == 0.0
    assert w.Phi_second(0.0) == pytest.approx(1.0, abs=1e-14)


def test_sqrt_weight_domain_exhausted():
    with pytest.raises(WeightDomainError) as err:
        build_weight(get_modulus("sqrt"), 3.0)
    assert err.value.sup_phi == pytest.approx(2.0, rel=1e-9)
    assert "weight domain exhausted" in str(err.value)


def test_ode_residual_lip(lip_weight):
    chk = check_weight_ode(lip_weight, np.linspace(0.1, 9.9, 99))
    assert chk.passed and chk.max_residual <= 1e-5


def test_loglip_second_derivative_increasing(loglip_weight):
    # tau <= 6 keeps exp(e^tau - 1) inside double range
    chk = check_weight_ode(loglip_weight, np.arange(0.0, 7.0))
    assert chk.nondecreasing
    assert np.all(np.diff(chk.second_derivative) > 0)
    assert chk.max_residual <= 1e-5


def test_ode_grid_outside_domain(lip_weight):
    with pytest.raises(DomainError):
        check_weight_ode(lip_weight, [1.0, 11.0])


def test_phi_inverse_roundtrip(loglip_weight):
    w = loglip_weight
    idx = np.arange(0, w.r.size, 997)
    t = np.exp(w.r[idx])
    t = t[w.tau[idx] <= w.tau_max]
    assert np.allclose(w.phi_inv(w.phi(t)), t, rtol=1e-10)


def test_phi_prime_matches_centered_difference(loglip_weight):
    w = loglip_weight
    tau = np.linspace(0.2, 5.8, 57)
    h = 1e-5
    fd = (w.Phi(tau + h) - w.Phi(tau - h)) / (2 * h)
    assert np.max(np.abs(fd / w.Phi_prime(tau) - 1)) <= 1e-5


@pytest.mark.parametrize("name", ["lip", "loglip", "holder:1"])
def test_sigma_mu_monotonicity(name):
    mu = get_modulus(name)
    sigma = 2.0 ** np.arange(21)
    f = sigma * mu(1 / sigma)
    assert np.all(np.diff(f) >= -1e-12 * f[1:])
    g = 1 / (sigma**2 * mu(1 / sigma))
    assert np.all(np.diff(g) <= 1e-12 * g[:-1])


def test_weight_csv_columns(lip_weight, tmp_path):
    path = lip_weight.to_csv(tmp_path / "w.csv", tau=np.linspace(0, 10, 11))
    rows = list(csv.DictReader(path.open()))
    assert list(rows[0]) == ["tau", "phi_inv", "Phi", "Phi_prime", "Phi_second"]
    for r in rows:
        tau = float(r["tau"])
        assert float(r["Phi"]) == pytest.approx(math.expm1(tau), rel=1e-8, abs=1e-300)


@given(st.floats(0.0, 9.9), st.floats(0.0, 9.9))
@settings(max_examples=50, deadline=None)
def test_Phi_monotone(lip_weight, a, b):
    lo, hi = sorted((a, b))
    assert lip_weight.Phi(lo) <= lip_weight.Phi(hi)
