import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jiggle_rr.errors import DomainError, InvalidCombinationError
from jiggle_rr.model import CLASSICAL, INFINITE, QUANTUM, ReducedParams, bose_occupancy
from jiggle_rr.spectrum import (SpectralTable, SpectrumSample, k_pm, mu_boundary,
                                mu_boundary_array, mu_complex, mu_complex_array,
                                sigma_asymptote, spectral_density, spectrum_csv, u_classical,
                                u_quantum)

# Faddeeva/QUADPACK oracle (tests/oracles.py::mu_oracle), in units of mu0.
COMPLEX_GOLDEN = [
    (1 + 0.5j, 1.0, INFINITE, QUANTUM, 1.2818859320558473 - 0.21220540628191448j),
    (1 + 0.5j, 1.0, 10.0, QUANTUM, 1.2820511668980152 - 0.21230720474357878j),
    (1 + 0.5j, 1.0, 10.0, CLASSICAL, -5.443406389942546 - 0.6306910654251129j),
    (-2 + 0.1j, 0.1, 1.0, CLASSICAL, -327.71532519684587 - 1.609457214029939j),
    (0.3 + 2j, 10.0, 0.1, QUANTUM, 7.419340047938806 + 0.06658150326783889j),
    (1 + 1j, 1.0, INFINITE, QUANTUM, 1.3675696898204788 - 0.1738238310142816j),
]


def test_k_pm_examples():
    assert k_pm(1.3, 0.0, 0.5, 2.0) == (0.0, 0.0)
    a = k_pm(1.0, 0.7, 1.0, INFINITE)
    b = k_pm(1.0, -0.7, 1.0, INFINITE)
    assert b[0] == -a[0] and b[1] == -a[1]
    kp, _ = k_pm(1.0, 1.0, 1.0, INFINITE)
    assert kp == pytest.approx(math.exp(-6.25) - math.exp(-0.25), rel=1e-15)


def test_k_pm_bounds_and_domain():
    x = np.linspace(0.05, 5, 40)[:, None]
    y = np.linspace(-6, 6, 41)[None, :]
    kp, km = k_pm(x, y, 0.7, 1.5)
    assert np.all(np.abs(kp) <= 1) and np.all(np.abs(km) <= 1)
    with pytest.raises(DomainError):
        k_pm(0.0, 1.0, 1.0, 1.0)


def test_u_examples():
    kp, _ = k_pm(1.0, 0.4, 1.0, INFINITE)
    assert u_quantum(1.0, 0.4, 1.0, INFINITE) == kp
    assert u_quantum(1.0, -0.7, 1.0, 2.0) == -u_quantum(1.0, 0.7, 1.0, 2.0)
    assert u_classical(1.0, -0.7, 1.0, 2.0) == -u_classical(1.0, 0.7, 1.0, 2.0)
    # direct evaluation of the defining formulas at (1, 1, 1, 2)
    assert u_quantum(1.0, 1.0, 1.0, 2.0) == pytest.approx(-0.8449303142849123, rel=1e-14)
    assert u_classical(1.0, 1.0, 1.0, 2.0) == pytest.approx(-0.8180637018873727, rel=1e-14)
    with pytest.raises(InvalidCombinationError):
        u_classical(1.0, 1.0, 1.0, INFINITE)


def test_u_minus_uc_identity():
    kp, km = k_pm(1.0, 1.0, 1.0, 2.0)
    lhs = u_quantum(1.0, 1.0, 1.0, 2.0) - u_classical(1.0, 1.0, 1.0, 2.0)
    rhs = (bose_occupancy(2.0) + 0.5 - 1.0 / 2.0) * (kp + km)
    assert lhs == pytest.approx(rhs, abs=1e-15)


@settings(max_examples=1000, deadline=None)
@given(st.floats(1e-3, 20.0), st.floats(-30.0, 30.0), st.floats(1e-3, 10.0),
       st.floats(1e-2, 1e2))
def test_u_oddness_property(x, y, chi, beta):
    assert u_quantum(x, -y, chi, beta) == -u_quantum(x, y, chi, beta)
    assert u_classical(x, -y, chi, beta) == -u_classical(x, y, chi, beta)


def test_sigma_asymptote():
    p = ReducedParams.create(1.0, INFINITE)
    assert sigma_asymptote(p) == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-14)
    assert sigma_asymptote(p.replace(beta_omegaI=1.0), CLASSICAL) == 0.0


@pytest.mark.parametrize("z,chi,beta,stats,golden", COMPLEX_GOLDEN)
def test_mu_complex_oracle(z, chi, beta, stats, golden):
    p = ReducedParams.create(chi, beta)
    s = mu_complex(z, p, stats)
    ref = golden * p.mu0
    assert abs(s.re_mu - ref.real) <= s.re_err
    assert abs(s.im_mu - ref.imag) <= s.im_err
    assert s.z == z and s.omega is None


def test_mu_complex_conjugate_reflection():
    p = ReducedParams.create(1.0, INFINITE)
    mu, err, ok = mu_complex_array([1 + 1j, -1 + 1j], p)
    assert ok.all()
    assert abs(mu[1] - np.conj(mu[0])) <= err[0] + err[1]


def test_mu_complex_imaginary_axis_approaches_sigma_inf():
    p = ReducedParams.create(1.0, 10.0)
    ys = np.array([1.0, 10.0, 100.0, 1000.0])
    mu, err, ok = mu_complex_array(1j * ys, p)
    assert ok.all()
    assert np.all(np.abs(mu.imag) <= err)
    gap = np.abs(mu - sigma_asymptote(p))
    assert np.all(np.diff(gap) < 0)
    assert mu[0].real / p.mu0 == pytest.approx(1.333850272357109, rel=1e-8)
    assert mu[-1].real / p.mu0 == pytest.approx(3.255247392015093, rel=1e-8)


@pytest.mark.xfail(strict=True, reason="mu tends to the ohmic constant sigma_inf, not to zero, "
                   "along the imaginary axis")
def test_mu_vanishes_far_up_the_imaginary_axis():
    p = ReducedParams.create(1.0, 10.0)
    mu, _, _ = mu_complex_array([1j, 1000j], p)
    assert abs(mu[1]) < 1e-2 * abs(mu[0])


def test_mu_complex_domain():
    p = ReducedParams.create(1.0)
    for z in (1.0 + 0j, 1.0 - 0.1j):
        with pytest.raises(DomainError):
            mu_complex(z, p)


def test_mu_boundary_symmetry():
    p = ReducedParams.create(1.0, 10.0)
    a = mu_boundary(1.0, p)
    b = mu_boundary(-1.0, p)
    assert abs(b.re_mu - a.re_mu) <= a.re_err + b.re_err
    assert abs(b.im_mu + a.im_mu) <= a.im_err + b.im_err
    assert a.omega == 1.0 and a.z is None


def test_mu_boundary_real_part_is_spectral_density():
    p = ReducedParams.create(0.1, 1.0)
    s = mu_boundary(2.0, p)
    v, e = spectral_density(2.0, p, tol=1e-10)
    assert abs(s.re_mu - v) <= s.re_err + e


def test_mu_boundary_quantum_classical_high_temperature():
    p = ReducedParams.create(1.0, 1e-2)
    q = mu_boundary(0.5, p, QUANTUM)
    c = mu_boundary(0.5, p, CLASSICAL)
    assert q.re_mu / p.mu0 == pytest.approx(793.3535452465121, rel=1e-6)
    assert c.re_mu / p.mu0 == pytest.approx(788.0078790714074, rel=1e-6)
    # zero-point motion shifts Re mu by under one percent at beta omega_I = 0.01
    assert abs(q.re_mu - c.re_mu) < 1e-2 * q.re_mu


def test_boundary_is_limit_of_complex():
    p = ReducedParams.create(1.0, 10.0)
    b = mu_boundary(1.0, p)
    etas = np.array([0.4, 0.2, 0.1, 0.05])
    mu, err, ok = mu_complex_array(1.0 + 1j * etas, p)
    gaps = np.abs(mu - b.mu)
    assert np.all(np.diff(gaps) < 0)
    orders = np.log(gaps[:-1] / gaps[1:]) / math.log(2.0)
    assert np.all(orders >= 0.9)


def test_mu_boundary_domain():
    with pytest.raises(DomainError):
        mu_boundary(0.0, ReducedParams.create(1.0))
    with pytest.raises(InvalidCombinationError):
        mu_boundary(1.0, ReducedParams.create(1.0), CLASSICAL)


def test_spectral_table_matches_direct():
    p = ReducedParams.create(1.0, 10.0)
    t = SpectralTable.build(p, span=4.0, resolution=0.25, tol=1e-10)
    z = np.array([1 + 0.5j, -2 + 1j, 0.3 + 2j])
    mt, et = t.mu(z)
    md, ed, ok = mu_complex_array(z, p)
    assert np.all(np.abs(mt - md) <= et + ed)
    w = np.array([-1.0, 1.0])
    bt, _, _ = t.boundary(w)
    bd, re_err, im_err, _ = mu_boundary_array(w, p)
    assert np.all(np.abs(bt - bd) <= 1e-6 * p.mu0)


def test_spectrum_sample_and_csv():
    with pytest.raises(DomainError):
        SpectrumSample(1.0, 0.0, 0.0, 0.0, QUANTUM)
    with pytest.raises(DomainError):
        SpectrumSample(1.0, 0.0, -1.0, 0.0, QUANTUM, omega=1.0)
    rows = [SpectrumSample(0.5, -0.25, 1e-9, 2e-9, QUANTUM, omega=-2.0),
            SpectrumSample(1.0, 2.0, 0.0, 0.0, CLASSICAL, z=1 + 0.5j)]
    text = spectrum_csv(rows)
    assert text == ("omega,re_mu,im_mu,re_err,im_err,stats\n"
                    "-2,0.5,-0.25,1.0000000000000001e-09,2.0000000000000001e-09,quantum\n"
                    "1+0.5j,1,2,0,0,classical\n")
