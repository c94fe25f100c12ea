import math

import numpy as np
import pytest

from delaycascade.kernels import Dirac, Uniform
from delaycascade.solver import InitialHistory, integrate_rhs
from delaycascade.stability import (
    CSV_HEADER,
    LinearizationData,
    Verdict,
    char_F,
    check_global,
    classify,
    mikhailov_argument,
    mikhailov_stable,
    omega0,
    tau_critical,
    zero_delay_stable,
)
from oracles import spectral_tau_cr


def data(mu, gamma, tau=None):
    return LinearizationData.from_products(mu, gamma, tau)


def test_check_global_examples():
    assert check_global((1.0, 2.5), (1.0, 2.5))
    assert check_global((0.0, 1e300), (1.0, 1.0))
    assert not check_global((2.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        check_global((-1.0, 1.0), (1.0, 1.0))


def test_check_global_overflow_safe():
    alphas = [1e200] * 4
    mus = [1e200] * 3 + [1.1e200]
    assert check_global(alphas, mus)
    assert not check_global(mus, alphas)


def test_check_global_permutation_invariant():
    rng = np.random.default_rng(1)
    for _ in range(200):
        k = rng.integers(1, 6)
        a = rng.uniform(0.1, 3.0, k)
        m = rng.uniform(0.1, 3.0, k)
        perm = rng.permutation(k)
        assert check_global(a, m) == check_global(a[perm], m[perm])


def test_char_F_examples():
    assert char_F(0.0, data((1, 1), -2.0)) == -3.0
    assert char_F(1.0, data((1, 1), -2.0)) == 0.0
    assert char_F(0.0, data((2.0, 3.0), -6.0)) == 0.0


def test_omega0_examples():
    assert abs(omega0(data((1, 1), -2.0)) - 1.0) <= 1e-12
    # (ω²+1)(ω²+4) = 9  ⇒  ω⁴ + 5ω² - 5 = 0  ⇒  ω² = (-5 + √45)/2
    expected = math.sqrt((-5.0 + math.sqrt(45.0)) / 2.0)
    assert abs(omega0(data((1, 2), -3.0)) - expected) <= 1e-9
    near = omega0(data((1, 1), -1.0000001))
    assert 0 < near < 1e-3


def test_omega0_precondition():
    with pytest.raises(ValueError):
        omega0(data((1, 1), -0.5))


def test_F_root_and_transversality_random():
    rng = np.random.default_rng(2)
    for _ in range(100):
        k = int(rng.integers(1, 5))
        mu = rng.uniform(0.2, 3.0, k)
        g = -math.prod(mu) * rng.uniform(1.01, 5.0)
        d = data(mu, g)
        w = omega0(d)
        assert abs(char_F(w, d)) <= 1e-10 * (1 + g * g)
        eps = 1e-6 * max(w, 1e-3)
        assert char_F(w + eps, d) > char_F(w - eps, d)


def test_tau_critical_examples():
    assert abs(tau_critical(data((1, 1), -2.0)) - math.pi / 2) <= 1e-9


def test_tau_critical_matches_spectral_oracle():
    cases = [((1.0, 1.0), -2.0), ((1.0, 2.0), -3.0), ((0.5,), -1.5), ((1.0, 0.7, 1.3), -2.0)]
    for mu, g in cases:
        ours = tau_critical(data(mu, g))
        ref = spectral_tau_cr(mu, g, 0.5 * ours, 1.5 * ours)
        assert ours == pytest.approx(ref, rel=1e-7)


def test_tau_critical_homogeneity():
    mu, g = (1.0, 2.0), -3.0
    base = tau_critical(data(mu, g))
    for c in (0.1, 3.0, 17.0):
        scaled = tau_critical(data([c * m for m in mu], g * c**2))
        assert c * scaled == pytest.approx(base, rel=1e-10)


def test_tau_critical_grows_toward_boundary():
    gammas = [-(1.0 + 10.0**-e) for e in range(1, 10)]
    taus = [tau_critical(data((1, 1), g)) for g in gammas]
    assert all(b > a for a, b in zip(taus, taus[1:]))
    assert taus[-1] > 1e3


def test_tau_critical_preconditions():
    with pytest.raises(ValueError, match="Gamma < 0"):
        tau_critical(data((1, 1), 2.0))
    with pytest.raises(ValueError, match="prod"):
        tau_critical(data((1, 1), -0.5))
    with pytest.raises(ValueError, match="zero-delay"):
        tau_critical(data((1, 1, 1), -9.0))


def test_classify_examples():
    r = classify(LinearizationData((1.0, 1.0), (0.5, 1.0)), alphas_available=(0.5, 1.0))
    assert r.verdict is Verdict.GLOBALLY_STABLE
    assert classify(data((1, 1), 2.0)).verdict is Verdict.DELAY_INDEPENDENT_UNSTABLE
    hopf = classify(data((1, 1), -2.0))
    assert hopf.verdict is Verdict.HOPF_BOUNDARY
    assert abs(hopf.omega0 - 1.0) <= 1e-12
    assert abs(hopf.tau_cr - math.pi / 2) <= 1e-9
    assert hopf.csv_row().endswith(",HopfBoundary")
    assert CSV_HEADER.split(",")[-1] == "verdict"


def test_classify_other_branches():
    assert classify(data((1, 1, 1), -9.0)).verdict is Verdict.UNSTABLE_ALL_DELAYS
    assert classify(data((1, 1), -1.0)).verdict is Verdict.INCONCLUSIVE
    assert classify(data((1, 1), -1.0), alphas_available=(1.0, 1.0)).verdict is Verdict.GLOBALLY_STABLE
    failing = classify(data((1, 1), -0.5), alphas_available=(3.0, 1.0))
    assert failing.verdict is Verdict.INCONCLUSIVE
    uni = classify(data((1, 1), -2.0), kernels=(Uniform(-2.0, -1.0, 2.0), Dirac(0.0, 2.0)))
    assert uni.verdict is Verdict.INCONCLUSIVE


def test_classify_side_note():
    r = classify(data((1, 1), -2.0, tau=1.0))
    assert any("stable side" in n for n in r.notes)
    r = classify(data((1, 1), -2.0, tau=2.0))
    assert any("unstable side" in n for n in r.notes)


def test_classify_sign_flip_keeps_small_gain_verdict():
    rng = np.random.default_rng(3)
    for _ in range(100):
        k = int(rng.integers(1, 5))
        mu = rng.uniform(0.2, 3.0, k)
        g = math.prod(mu) * rng.uniform(0.0, 1.0)
        alphas = (abs(g),) + (1.0,) * (k - 1)
        a = classify(data(mu, g), alphas_available=alphas).verdict
        b = classify(data(mu, -g), alphas_available=alphas).verdict
        assert a is b is Verdict.GLOBALLY_STABLE


def test_mikhailov_examples():
    stable = mikhailov_argument(data((1, 1), -0.5, 0.0), None, 1e4, 200_001)
    assert abs(stable - math.pi) <= 0.05 and mikhailov_stable(stable, 2)
    unstable = mikhailov_argument(data((1, 1), 2.0, 1.0), None, 1e4, 400_001)
    assert not mikhailov_stable(unstable, 2)
    free = mikhailov_argument(data((1, 1), 0.0, 0.0), None, 1e4, 200_001)
    assert free == pytest.approx(math.pi, abs=0.05)


def test_mikhailov_agrees_with_tau_critical_on_dirac_kernels():
    for factor, expect in ((0.9, True), (1.1, False)):
        tau = factor * math.pi / 2
        kernels = (Dirac(-tau, tau), Dirac(0.0, tau))
        change = mikhailov_argument(data((1, 1), -2.0), kernels, 1e4, 800_001)
        assert mikhailov_stable(change, 2) is expect


def test_mikhailov_errors():
    with pytest.raises(ValueError, match="coarse"):
        mikhailov_argument(data((1, 1), -2.0, 5.0), None, 1e4, 1001)
    with pytest.raises(ValueError, match="omega_max"):
        mikhailov_argument(data((1, 1), -0.5, 0.0), None, 10.0, 10_001)


def _random_hopf_draws(rng, n):
    draws = []
    while len(draws) < n:
        k = int(rng.integers(1, 4))
        mu = rng.uniform(0.3, 2.0, k)
        g = -math.prod(mu) * rng.uniform(1.3, 4.0)
        if k == 3 and not zero_delay_stable(data(mu, g)):
            continue
        draws.append((mu, g))
    return draws


def _amplitude_trends(draws, factor, k, span=400.0, per_delay=40):
    """Simulate each linearized cascade in time units of its own delay (τ = 1)."""
    taus = np.array([factor * tau_critical(data(mu, g)) for mu, g in draws])
    mus = np.array([mu for mu, _ in draws])
    gs = np.array([g for _, g in draws])

    def rhs(x, xt):
        out = -mus * x
        out[:, 0] += gs * xt[:, k - 1]
        out[:, 1:] += x[:, :-1]
        return taus[:, None] * out

    phis = [InitialHistory.constant([1e-3] * k, 1.0) for _ in draws]
    trajs = integrate_rhs(rhs, k, 1.0, phis, span, 1.0 / per_delay)
    t = trajs[0].times
    late = t >= span - 40.0
    mid = (t >= span / 2 - 40.0) & (t <= span / 2)
    out = []
    for tr in trajs:
        x = np.abs(tr.states[:, 0])
        out.append(math.log(x[late].max() / x[mid].max()))
    return np.array(out)


def test_hopf_boundary_cross_validated_by_simulation():
    rng = np.random.default_rng(4)
    draws = _random_hopf_draws(rng, 50)
    for k in (1, 2, 3):
        group = [d for d in draws if len(d[0]) == k]
        if not group:
            continue
        below = _amplitude_trends(group, 0.9, k)
        above = _amplitude_trends(group, 1.1, k)
        assert np.all(below < 0), below
        assert np.all(above > 0), above
