import math

import numpy as np
import pytest

from jiggle_rr.com_dynamics import COMState, delta_sq, green_g
from jiggle_rr.errors import DomainError
from jiggle_rr.model import INFINITE


def test_delta_sq_examples():
    assert delta_sq(0.0, COMState(1.0, INFINITE)) == 0.0
    assert delta_sq(1.0, COMState(1.0, INFINITE)) == pytest.approx(0.5, rel=1e-15)
    assert delta_sq(1.0, COMState(1.0, math.log(3.0))) == pytest.approx(1.0, rel=1e-14)


def test_delta_sq_rejects_negative_tau():
    with pytest.raises(DomainError):
        delta_sq(-0.1, COMState(1.0, INFINITE))


def test_delta_sq_nonnegative_monotone():
    t = np.linspace(0.0, 50.0, 2001)
    for beta in (0.1, 1.0, INFINITE):
        d = delta_sq(t, COMState(0.3, beta))
        assert np.all(d >= 0) and np.all(np.diff(d) >= 0)


def test_delta_sq_linear_in_bracket():
    t = np.linspace(0.0, 5.0, 11)
    s = COMState(0.7, 0.5)
    np.testing.assert_allclose(delta_sq(t, s), s.bracket * delta_sq(t, COMState(0.7, INFINITE)),
                               rtol=1e-15)


def test_green_g_examples():
    s = COMState(0.25, 1.0)
    assert green_g(-1.0, s) == 0.0
    assert green_g(0.0, s) == 0.0
    assert green_g(1.0, s) == pytest.approx(0.25, rel=1e-15)
    vals = [green_g(2.0, COMState(0.25, b)) for b in (0.1, 1.0, INFINITE)]
    assert vals[0] == vals[1] == vals[2]


def test_green_g_linear():
    t = np.linspace(-3.0, 3.0, 61)
    g = green_g(t, COMState(2.0, INFINITE))
    np.testing.assert_array_equal(g[t <= 0], 0.0)
    np.testing.assert_allclose(g[t > 0], 2.0 * t[t > 0], rtol=1e-15)


def test_com_state_validation():
    with pytest.raises(DomainError):
        COMState(-1.0, 1.0)
    with pytest.raises(DomainError):
        COMState(1.0, 0.0)
