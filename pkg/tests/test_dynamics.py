import math

import numpy as np
import pytest

from jiggle_rr.dynamics import (Model, Trajectory, al_char_roots, al_trajectory,
                                amended_response, amended_trajectory, volterra_evolve)
from jiggle_rr.errors import (BandwidthError, DomainError, GridError, NearResonanceError,
                              RunawayOverflowError)
from jiggle_rr.model import QUANTUM, ReducedParams


def rms(a):
    return float(np.sqrt(np.mean(np.square(a))))


@pytest.fixture(scope="module")
def weak():
    return ReducedParams.create(1.0, 10.0, gamma_omegaI=0.05)


@pytest.fixture(scope="module")
def amended_weak(weak):
    return amended_trajectory(1.0, 0.0, 50.0, 4096, weak)


def test_roots_example():
    cr = al_char_roots(0.1, 1.0)
    z = np.array(cr.roots)
    # companion-matrix oracle
    ref = np.roots([0.1j, 1.0, 0.0, -1.0])
    for r in ref:
        assert np.min(np.abs(z - r)) < 1e-12
    assert cr.runaway.real == 0.0
    assert cr.runaway.imag == pytest.approx(10.098067136087419, rel=1e-14)
    assert cr.runaway.imag == pytest.approx(10.0, rel=0.1)
    pair = sorted(z[1:], key=lambda w: w.real)
    assert pair[1] == pytest.approx(0.9939236556494045 - 0.04903356804370926j, rel=1e-13)
    assert pair[1].real == pytest.approx(1.0, rel=0.1)
    assert pair[1].imag == pytest.approx(-0.05, rel=0.1)


@pytest.mark.parametrize("gamma", [1e-2, 1e-3])
def test_runaway_root_perturbative(gamma):
    cr = al_char_roots(gamma, 1.0)
    assert abs(cr.runaway.imag - 1.0 / gamma) <= 2 * gamma ** 2 * (1.0 / gamma)


@pytest.mark.parametrize("gamma,omega0", [(0.1, 1.0), (1e-3, 2.0), (3.0, 0.5), (1e-6, 1.0)])
def test_roots_invariants(gamma, omega0):
    cr = al_char_roots(gamma, omega0)
    z = np.array(cr.roots)
    assert np.all(cr.residuals() < 1e-10 * np.maximum(1.0, np.abs(z) ** 3 * gamma))
    assert abs(z.sum() - 1j / gamma) <= 1e-12 * (1.0 / gamma)
    for w in z:
        assert np.min(np.abs(z + np.conj(w))) <= 1e-12 * max(1.0, abs(w))
    assert sum(1 for w in z if w.imag > 0) == 1


def test_roots_json():
    d = al_char_roots(0.1, 1.0).as_dict()
    assert len(d["roots"]) == 3 and d["roots"][0]["im"] > 0


def test_al_runaway_growth():
    tr = al_trajectory(0.1, 1.0, 1.0, 0.0, 5.0, 0.01)
    assert abs(tr.rs[-1]) / abs(tr.rs[0]) > math.exp(5.0 * 9)
    assert tr.metadata["third_condition"] == "a(0) = 0"
    assert tr.model is Model.CLASSICAL_AL


def test_al_suppressed_is_bounded():
    tr = al_trajectory(0.1, 1.0, 1.0, 0.0, 60.0, 0.01, suppress_runaway=True)
    assert np.max(np.abs(tr.rs)) <= 1.0 + 1e-6
    assert tr.rs[0] == pytest.approx(1.0, abs=1e-14)
    # envelope decay rate of the damped pair
    pk = tr.peaks()
    rate = -np.polyfit(np.arange(len(pk)) * (math.pi / 0.9939236556494045), np.log(pk), 1)[0]
    assert rate == pytest.approx(0.04903356804370926, rel=0.02)
    assert rate == pytest.approx(0.1 / 2, rel=0.05)


def test_al_small_gamma_limit():
    tr = al_trajectory(1e-8, 1.0, 1.0, 0.0, 10.0, 0.01, suppress_runaway=True)
    assert np.max(np.abs(tr.rs - np.cos(tr.ts))) < 1e-6


def test_al_overflow():
    with pytest.raises(RunawayOverflowError) as info:
        al_trajectory(0.1, 1.0, 1.0, 0.0, 100.0, 0.1)
    assert info.value.timescale == pytest.approx(1.0 / 10.098067136087419)
    assert "exp(t/" in str(info.value)


def test_response_injection_and_symmetry(weak):
    w = np.array([0.3, 0.8, 1.7])
    a = amended_response(w, weak, mu=lambda x: np.zeros_like(x))
    np.testing.assert_array_equal(a, 1.0 / (1.0 - w * w))
    both = amended_response(np.r_[-w, w], weak)
    np.testing.assert_allclose(both[:3], np.conj(both[3:]), rtol=1e-7)
    with pytest.raises(NearResonanceError):
        amended_response([1.0], weak, mu=lambda x: np.zeros_like(x))
    with pytest.raises(DomainError):
        amended_response([0.0, 1.0], weak)


def test_response_peak_near_omega0():
    p = ReducedParams.create(1.0, 10.0, gamma_omegaI=1e-2)
    w = np.linspace(0.5, 1.5, 2001)
    a = np.abs(amended_response(w, p))
    assert abs(w[np.argmax(a)] - 1.0) < 0.05


def test_amended_free_injection():
    p = ReducedParams.create(1.0, 10.0)
    tr = amended_trajectory(1.0, 0.0, 50.0, 4096, p, mu=lambda z: np.zeros_like(z))
    assert rms(tr.rs - np.cos(tr.ts)) < 1e-4
    assert tr.metadata["injected_mu"]


def test_amended_envelope_and_bound(amended_weak):
    tr = amended_weak
    pk = tr.peaks()
    assert len(pk) == 15  # one |r| maximum per half period
    assert np.all(np.diff(pk) <= 1e-6)
    assert tr.metadata["bounded"]
    assert np.max(np.abs(tr.rs)) <= 1.05
    assert tr.metadata["imag_residue"] < 1e-10
    assert tr.rs[0] == pytest.approx(1.0, abs=1e-6)


def test_amended_doubling(weak, amended_weak):
    fine = amended_trajectory(1.0, 0.0, 50.0, 8192, weak)
    sub = np.interp(amended_weak.ts, fine.ts, fine.rs)
    assert rms(amended_weak.rs - sub) < 1e-3


def test_amended_high_resolution_oracle(weak, amended_weak):
    fine = amended_trajectory(1.0, 0.0, 50.0, 4 * 4096, weak)
    sub = np.interp(amended_weak.ts, fine.ts, fine.rs)
    assert rms(amended_weak.rs - sub) < 1e-3


def test_amended_bandwidth_error(weak):
    with pytest.raises(BandwidthError, match="increase n_samples"):
        amended_trajectory(1.0, 0.0, 50.0, 64, weak)


def test_amended_validation(weak):
    with pytest.raises(DomainError):
        amended_trajectory(1.0, 0.0, 50.0, 1000, weak)


def test_volterra_free_injection():
    p = ReducedParams.create(1.0, 10.0)
    tr = volterra_evolve(1.0, 0.0, 20.0, 1e-3, p, tau_min=1e-4, kernel=lambda t: 0.0 * t)
    assert rms(tr.rs - np.cos(tr.ts)) < 1e-4
    assert tr.metadata["label"] == "DIAGNOSTIC"
    assert tr.model is Model.AMENDED_VOLTERRA


def test_volterra_grid_error(weak):
    with pytest.raises(GridError):
        volterra_evolve(1.0, 0.0, 1.0, 1e-3, weak, tau_min=1e-3)


@pytest.mark.slow
def test_volterra_agrees_with_spectral(weak):
    sp = amended_trajectory(1.0, 0.0, 20.0, 4096, weak)
    vt = volterra_evolve(1.0, 0.0, 20.0, 0.01, weak)
    ref = np.interp(vt.ts, sp.ts, sp.rs)
    assert rms(vt.rs - ref) < 0.05 * rms(ref)
    assert math.isfinite(vt.metadata["omission_estimate"])


@pytest.mark.slow
def test_volterra_halving(weak):
    runs = [volterra_evolve(1.0, 0.0, 5.0, dt, weak) for dt in (0.04, 0.02, 0.01)]
    grid = runs[0].ts
    a, b, c = (np.interp(grid, r.ts, r.rs) for r in runs)
    d1, d2 = rms(a - b), rms(b - c)
    assert d2 < d1 / 2.0


def test_trajectory_validation_and_csv():
    with pytest.raises(DomainError):
        Trajectory([0.0, 0.0], [1.0, 2.0], Model.CLASSICAL_AL, {})
    tr = Trajectory([0.0, 0.5], [1.0, -0.25], Model.AMENDED_SPECTRAL,
                    {"chi": 1.0, "beta_omegaI": "inf"}, {"bounded": True, "eta": 0.24,
                                                         "skip": [1, 2]})
    assert tr.to_csv() == ("# model=amended\n# chi=1\n# beta_omegaI=inf\n"
                           "# bounded=true\n# eta=0.23999999999999999\nt,r\n0,1\n0.5,-0.25\n")
