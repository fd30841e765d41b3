"""Weight-function calculus: closed-form oracles and monotone invariants."""

import numpy as np
import pytest

from robust_scatter.exceptions import AdmissibilityError
from robust_scatter.weights import (
    HUBER,
    STUDENT,
    RegimeParams,
    UFunction,
    eval_g,
    eval_phi,
    eval_psi,
    eval_u,
    eval_v,
    g_inverse,
    phi_inverse,
    psi_inf,
    psi_inverse,
    require_admissible,
    validate_admissibility,
)

US = UFunction(STUDENT, 0.1)
UH = UFunction(HUBER, 0.1)


# ---------------------------------------------------------------------------
# closed-form inverses used as independent oracles
# ---------------------------------------------------------------------------

def phi_inverse_oracle(u, y):
    """Closed form of phi^-1, solved by hand per family."""
    t = u.t
    if u.kind == HUBER and y <= 1.0:
        # phi_H(x) = x on [0, 1]
        return y
    # phi_S(x) = x (1+t)/(t+x) = y  =>  x = y t / (1 + t - y)
    return y * t / (1.0 + t - y)


def g_inverse_oracle(u, c, y):
    """Closed form of g^-1 = (x / (1 - c phi(x)))^-1, per family."""
    t = u.t
    if u.kind == HUBER and y <= 1.0 / (1.0 - c):
        # on the plateau phi(x) = x, so g(x) = x / (1 - c x)
        return y / (1.0 + c * y)
    # Student branch: x^2 + x (t - y + y c (1+t)) - y t = 0, positive root
    b = t - y + y * c * (1.0 + t)
    return (-b + np.sqrt(b * b + 4.0 * y * t)) / 2.0


@pytest.mark.parametrize("u", [US, UH, UFunction(STUDENT, 0.7),
                               UFunction(HUBER, 2.3)])
def test_phi_inverse_matches_closed_form(u):
    for y in np.linspace(0.01, u.phi_inf * 0.999, 40):
        assert phi_inverse(u, y) == pytest.approx(phi_inverse_oracle(u, y),
                                                  rel=1e-12)


@pytest.mark.parametrize("u,c", [(US, 0.2), (UH, 0.2), (US, 0.5),
                                 (UFunction(HUBER, 0.6), 0.3)])
def test_g_inverse_matches_closed_form(u, c):
    if u.phi_inf >= 1.0 / c:
        pytest.skip("g undefined for this (u, c)")
    for y in np.geomspace(0.01, 100.0, 40):
        assert g_inverse(u, c, y) == pytest.approx(g_inverse_oracle(u, c, y),
                                                   rel=1e-12)


# ---------------------------------------------------------------------------
# point values
# ---------------------------------------------------------------------------

def test_u_point_values():
    assert eval_u(US, 0.0) == pytest.approx(11.0)
    assert eval_u(US, 1.0) == pytest.approx(1.0)
    # Huber clips the weight at 1 on [0, 1] and decays beyond
    assert eval_u(UH, 0.0) == 1.0
    assert eval_u(UH, 0.5) == 1.0
    assert eval_u(UH, 2.0) == pytest.approx(1.1 / 2.1)


def test_phi_inf_property():
    assert US.phi_inf == pytest.approx(1.1)
    assert UH.phi_inf == pytest.approx(1.1)
    x = 1e9
    assert eval_phi(US, x) == pytest.approx(1.1, rel=1e-8)
    assert eval_phi(UH, x) == pytest.approx(1.1, rel=1e-8)


def test_psi_inf_value():
    c = 0.2
    assert psi_inf(US, c) == pytest.approx(1.1 / (1 - 0.2 * 1.1))


def test_huber_v_plateau():
    # v_H is identically 1 up to g(1) = 1/(1-c)
    c = 0.2
    edge = 1.0 / (1.0 - c)
    for x in np.linspace(0.01, edge * 0.999, 20):
        assert eval_v(UH, c, x) == pytest.approx(1.0)
    assert eval_v(UH, c, edge * 1.5) < 1.0


# ---------------------------------------------------------------------------
# randomized monotonicity / round-trip properties (1000 probes)
# ---------------------------------------------------------------------------

def test_randomized_invariants():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        kind = STUDENT if rng.random() < 0.5 else HUBER
        t = float(rng.uniform(0.05, 3.0))
        u = UFunction(kind, t)
        c = float(rng.uniform(0.02, min(0.9, 0.95 / u.phi_inf)))
        x1, x2 = np.sort(rng.uniform(0.0, 50.0, size=2))

        # u non-increasing, positive; phi / g / psi increasing
        assert eval_u(u, x2) <= eval_u(u, x1) + 1e-15
        assert eval_u(u, x2) > 0
        if x2 > x1:
            assert eval_phi(u, x2) >= eval_phi(u, x1)
            assert eval_g(u, c, x2) > eval_g(u, c, x1)
            assert eval_psi(u, c, x2) >= eval_psi(u, c, x1)
            assert eval_v(u, c, x2) <= eval_v(u, c, x1) + 1e-12

        # round trips
        y = float(rng.uniform(0.0, u.phi_inf * 0.999))
        assert eval_phi(u, phi_inverse(u, y)) == pytest.approx(y, abs=1e-12)
        yg = float(rng.uniform(0.0, 200.0))
        assert eval_g(u, c, g_inverse(u, c, yg)) == pytest.approx(
            yg, rel=1e-11, abs=1e-12)
        yp = float(rng.uniform(0.0, psi_inf(u, c) * 0.999))
        assert eval_psi(u, c, psi_inverse(u, c, yp)) == pytest.approx(
            yp, rel=1e-11, abs=1e-12)

        # psi = phi composed through g: psi(g(x)) = phi(x) / (1 - c phi(x))
        x = float(rng.uniform(0.0, 20.0))
        phix = eval_phi(u, x)
        assert eval_psi(u, c, eval_g(u, c, x)) == pytest.approx(
            phix / (1 - c * phix), rel=1e-10, abs=1e-12)


# ---------------------------------------------------------------------------
# admissibility and domain errors
# ---------------------------------------------------------------------------

def test_admissibility_window():
    r = RegimeParams(c=0.2, epsilon=0.05)
    assert validate_admissibility(US, r).ok
    # phi_inf too small: 1 + t <= 1/(1 - eps)
    assert not validate_admissibility(UFunction(STUDENT, 0.03), r).ok
    # phi_inf too large: 1 + t >= 1/c
    assert not validate_admissibility(UFunction(STUDENT, 5.0), r).ok
    with pytest.raises(AdmissibilityError):
        require_admissible(UFunction(STUDENT, 5.0), r)


def test_growth_rate_constraint():
    r = RegimeParams(c=0.97, epsilon=0.05)
    assert not r.satisfies_growth_rate
    assert not validate_admissibility(US, r).ok


def test_domain_errors():
    with pytest.raises(ValueError):
        eval_u(US, -1.0)
    with pytest.raises(ValueError):
        phi_inverse(US, 1.2)          # >= phi_inf
    with pytest.raises(ValueError):
        psi_inverse(US, 0.2, psi_inf(US, 0.2))
    with pytest.raises(ValueError):
        UFunction("cauchy", 0.1)
    with pytest.raises(ValueError):
        UFunction(STUDENT, 0.0)
    with pytest.raises(AdmissibilityError):
        eval_g(UFunction(STUDENT, 9.0), 0.2, 1.0)   # phi_inf >= 1/c
