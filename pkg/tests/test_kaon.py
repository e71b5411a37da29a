import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from gamowlab.errors import DomainError, InsufficientData, InvalidParameter, NonConvergence
from gamowlab.gamow_core import GamowState, decay_rate
from gamowlab.kaon import (BeamConfig, CountingHistogram, DecaySample, PhysicalPreset, chi_square,
                           fit_lifetime, histogram, inject_noise, sample_decays,
                           to_lab_distance)

CFG = BeamConfig(2.0, 1.0, 100_000, seed=12345)


def test_beam_validation():
    for args in [(0, 1, 10), (1, -1, 10), (1, 1, 0), (1, 1, 10, -3)]:
        with pytest.raises(InvalidParameter):
            BeamConfig(*args)


def test_determinism_and_worker_independence():
    cfg = BeamConfig(1.0, 1.0, 200_000, seed=99)
    a = sample_decays(cfg, 1.0, {"pi+pi-": 0.7, "pi0pi0": 0.3})
    b = sample_decays(cfg, 1.0, {"pi+pi-": 0.7, "pi0pi0": 0.3}, workers=3)
    assert a == b
    assert a != sample_decays(BeamConfig(1.0, 1.0, 200_000, seed=100), 1.0,
                              {"pi+pi-": 0.7, "pi0pi0": 0.3})


def test_sample_mean_lifetime():
    s = sample_decays(BeamConfig(1.0, 1.0, 1_000_000, seed=1), 1.0)
    assert 0.997 <= s.proper_time.mean() <= 1.003
    assert np.all(s.proper_time >= 0)


def test_channel_fractions():
    s = sample_decays(BeamConfig(1.0, 1.0, 200_000, seed=4), 1.0, {"a": 0.25, "b": 0.75})
    frac = np.mean(s.channel_index == s.channels.index("a"))
    assert abs(frac - 0.25) < 3 * math.sqrt(0.25 * 0.75 / 200_000) * 1.5


def test_event_view():
    s = sample_decays(BeamConfig(3.0, 1.5, 10, seed=0), 1.0)
    e = s[3]
    assert e.lab_distance == pytest.approx(2 * e.proper_time, rel=1e-15)
    assert e.channel == "pi+pi-"
    assert len(list(s)) == 10


def test_lab_distance_examples():
    assert to_lab_distance(0.0, CFG) == 0.0
    assert to_lab_distance(1.7, BeamConfig(5.0, 5.0, 1)) == 1.7
    assert to_lab_distance(2.0, BeamConfig(3.0, 1.5, 1)) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        to_lab_distance(-1e-9, CFG)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1e6), st.floats(0, 1e3))
def test_kinematic_linearity(t, lam):
    assert to_lab_distance(lam * t, CFG) == pytest.approx(lam * to_lab_distance(t, CFG), rel=1e-14)


def test_single_wide_bin():
    s = sample_decays(BeamConfig(1.0, 1.0, 5000, seed=2), 1.0)
    h = histogram(s, (0.0, s.lab_distance.max()), 1e3, BeamConfig(1.0, 1.0, 5000))
    assert h.counts.tolist() == [5000]


def test_noise_rejection():
    s = inject_noise(sample_decays(CFG, 1.0), [-0.1, -2.0, -1e-9])
    h = histogram(s, (0.2, 10.0), 0.1, CFG)
    assert h.noise_rejected == 3
    assert h.n_events == len(s)
    assert np.all(h.edges >= 0)


def test_sum_rule_brute_force():
    rng = np.random.default_rng(6)
    s = inject_noise(sample_decays(BeamConfig(2.0, 1.0, 20_000, seed=3), 1.0),
                     -rng.random(17))
    cfg = BeamConfig(2.0, 1.0, 20_000)
    for _ in range(20):
        lo = rng.uniform(0, 3)
        hi = lo + rng.uniform(0.5, 8)
        w = rng.uniform(0.05, 1.0)
        h = histogram(s, (lo, hi), w, cfg)
        d = s.lab_distance
        inside = (d >= lo) & (d <= hi)
        assert h.counts.sum() == inside.sum()
        assert h.noise_rejected == 17
        assert h.counts.sum() + h.noise_rejected + h.out_of_window == len(s)
        # recount bin by bin
        t = d / cfg.boost
        for k in range(h.counts.size):
            a, b = h.edges[k], h.edges[k + 1]
            last = k == h.counts.size - 1
            n = np.sum(inside & (t >= a) & ((t <= b) if last else (t < b)))
            assert n == h.counts[k]


def test_histogram_merge():
    cfg = BeamConfig(1.0, 1.0, 10_000)
    a = histogram(sample_decays(BeamConfig(1.0, 1.0, 10_000, seed=1), 1.0), (0, 5), 0.5, cfg)
    b = histogram(sample_decays(BeamConfig(1.0, 1.0, 10_000, seed=2), 1.0), (0, 5), 0.5, cfg)
    m = a + b
    assert np.array_equal(m.counts, a.counts + b.counts)
    assert m.n_events == 20_000
    assert np.array_equal((a + b).counts, (b + a).counts)
    with pytest.raises(InvalidParameter):
        a + histogram(sample_decays(cfg, 1.0), (0, 5), 0.25, cfg)


def test_window_validation():
    s = sample_decays(BeamConfig(1.0, 1.0, 100), 1.0)
    with pytest.raises(DomainError):
        histogram(s, (-1.0, 5.0), 0.1, BeamConfig(1.0, 1.0, 100))
    with pytest.raises(InvalidParameter):
        histogram(s, (1.0, 0.5), 0.1, BeamConfig(1.0, 1.0, 100))


def test_untruncated_fit_closed_form():
    s = sample_decays(BeamConfig(1.0, 1.0, 50_000, seed=8), 2.5)
    fit = fit_lifetime(s)
    assert fit.gamma_hat == pytest.approx(1 / s.proper_time.mean(), rel=1e-8)
    assert fit.stderr == pytest.approx(fit.gamma_hat / math.sqrt(50_000), rel=1e-8)


def test_truncated_fit_recovers_width():
    s = sample_decays(CFG, 1.0)
    fit = fit_lifetime(s, (0.1, 5.0))
    assert abs(fit.gamma_hat - 1.0) < 3 * fit.stderr
    assert fit.gamma_hat > 0 and fit.stderr > 0


def test_binned_fit_recovers_width():
    h = histogram(sample_decays(CFG, 1.0), (0.2, 10.0), 0.1, CFG)
    fit = fit_lifetime(h)
    assert fit.method == "binned"
    assert abs(fit.gamma_hat - 1.0) < 3 * fit.stderr


def test_split_sample_agreement():
    s = sample_decays(CFG, 1.0).proper_time
    fits = []
    for part in (s[::2], s[1::2]):
        n = part.size
        sub = DecaySample(part, part, np.zeros(n, dtype=np.int64), ("pi+pi-",), np.zeros(n, bool))
        fits.append(fit_lifetime(sub, (0.1, 5.0)))
    a, b = fits
    assert abs(a.gamma_hat - b.gamma_hat) < 3 * math.hypot(a.stderr, b.stderr)


def test_stderr_scaling():
    errs = [fit_lifetime(sample_decays(BeamConfig(1.0, 1.0, n, seed=n), 1.0), (0.1, 5.0)).stderr
            for n in (1_000, 10_000, 100_000)]
    for small, large in zip(errs, errs[1:]):
        assert small / large == pytest.approx(math.sqrt(10), rel=0.2)


def test_likelihood_maximum():
    s = sample_decays(BeamConfig(1.0, 1.0, 20_000, seed=5), 1.0)
    t = s.proper_time[(s.proper_time >= 0.1) & (s.proper_time <= 5.0)]
    fit = fit_lifetime(s, (0.1, 5.0))

    def loglik(g):
        z = math.exp(-0.1 * g) - math.exp(-5.0 * g)
        return t.size * math.log(g) - g * t.sum() - t.size * math.log(z)

    assert fit.log_likelihood == pytest.approx(loglik(fit.gamma_hat), rel=1e-12)
    assert loglik(fit.gamma_hat) > loglik(fit.gamma_hat * 1.001)
    assert loglik(fit.gamma_hat) > loglik(fit.gamma_hat * 0.999)


def test_fit_errors():
    with pytest.raises(InsufficientData):
        fit_lifetime(sample_decays(BeamConfig(1.0, 1.0, 50), 1.0))
    # uniform times on [0, 1]: mean at the window centre, no interior maximum
    n = 1000
    u = np.linspace(0, 1, n)
    flat = DecaySample(u, u, np.zeros(n, dtype=np.int64), ("x",), np.zeros(n, bool))
    with pytest.raises(NonConvergence):
        fit_lifetime(flat, (0.0, 1.0))


def test_chi_square_against_rate_curve():
    h = histogram(sample_decays(CFG, 1.0), (0.2, 10.0), 0.1, CFG)
    chi2, n = chi_square(h, 1.0)
    assert chi2 / n < 2
    # expected counts are the integral of the exact decay rate over each bin
    g = GamowState.from_values(1.0, 1.0)
    k = 7
    a, b = h.edges[k], h.edges[k + 1]
    integral, _ = quad(lambda t: decay_rate(g, "pi+pi-", t), a, b)
    assert integral == pytest.approx(math.exp(-a) - math.exp(-b), rel=1e-10)


def test_rate_and_error():
    h = CountingHistogram(np.array([0.0, 0.5, 1.0]), np.array([100, 25]))
    assert np.allclose(h.rate, [200, 50])
    assert np.allclose(h.rate_error, [20, 10])
    assert h.bin_width == 0.5


def test_physical_preset():
    s = sample_decays(CFG, 1.0)
    fit = fit_lifetime(s, (0.1, 5.0))
    rep = PhysicalPreset(tau_s=1e-10, momentum_p=1.0, mass_m=0.5).report(fit)
    assert rep["tau_s"] == pytest.approx(1e-10 / fit.gamma_hat)
    assert rep["mean_decay_length_m"] == pytest.approx(299_792_458.0 * rep["tau_s"] * 2)
