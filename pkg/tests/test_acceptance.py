"""Acceptance gate: one test per criterion, each with its runtime budget."""

import math
import time

import numpy as np
import pytest

from corpus import CORPUS, GAMMA, MODEL, POLE
from gamowlab.errors import SemigroupDomain, TimeOrderViolation
from gamowlab.gamow_core import (GamowState, background_integral, born_limit_check,
                                 conjugate_semigroup_evolve, decompose, gamow_energy_density,
                                 hegerfeldt_demo, semigroup_evolve, survival_amplitude_exact)
from gamowlab.histories import (DensityOperator, Hamiltonian, HistoryChain, ProjectorFamily,
                                chain_probabilities, chain_probability, evolve_projector,
                                exhaustive_scan)
from gamowlab.kaon import (BeamConfig, chi_square, fit_lifetime, histogram, inject_noise,
                           sample_decays)
from gamowlab.quadrature import integrate
from gamowlab.resonance_model import SMatrixModel, eval_s_matrix, find_poles


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f} s > {self.seconds} s"


def _unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@pytest.mark.acceptance(1, "exponential law from the semigroup")
def test_exponential_law():
    with Budget(1.0):
        for gamma in (0.01, 0.1, 1.0, 7.5):
            g = GamowState.from_values(1.0, gamma)
            for t in np.linspace(0, 10 / gamma, 1001):
                assert abs(semigroup_evolve(g, t).survival_probability - math.exp(-gamma * t)) < 1e-12


@pytest.mark.acceptance(2, "semigroup domain asymmetry")
def test_domain_asymmetry():
    rng = np.random.default_rng(2024)
    g = GamowState(POLE)
    times = rng.uniform(1e-12, 1e3, 1000) * rng.choice([1.0, 1e-6, 1e3], 1000)
    with Budget(1.0):
        raised = 0
        for t in times:
            for call, arg in ((semigroup_evolve, -t), (conjugate_semigroup_evolve, t)):
                try:
                    call(g, arg)
                except SemigroupDomain:
                    raised += 1
        assert raised == 2 * times.size


@pytest.mark.acceptance(3, "keystone reconstruction on the corpus")
def test_keystone_reconstruction():
    assert len(CORPUS) >= 5
    grid = np.linspace(0, 5 / GAMMA, 20)
    with Budget(30.0):
        worst = 0.0
        for f in CORPUS.values():
            d = decompose(f, MODEL)
            assert len(d.gamow_terms) == 1
            (g, c), = d.gamow_terms
            for t in grid:
                exact = survival_amplitude_exact(f, t)
                pole = c * np.exp(-1j * g.e_r * t - g.gamma * t / 2)
                worst = max(worst, abs(exact - (pole + background_integral(d, t))))
        assert worst < 1e-6


@pytest.mark.acceptance(4, "no vanishing survival at negative times")
def test_hegerfeldt():
    grid = [-0.5 / GAMMA, -1 / GAMMA, -2 / GAMMA]
    with Budget(5.0):
        for f in CORPUS.values():
            report = hegerfeldt_demo(f, grid, state=GamowState(POLE))
            assert report.min_probability > 1e-8
            assert report.semigroup_rejects


@pytest.mark.acceptance(5, "histories: dual formulas and telescoping sums")
def test_histories_dual_forms():
    rng = np.random.default_rng(5)
    with Budget(10.0):
        for _ in range(100):
            d = int(rng.integers(2, 7))
            n = int(rng.integers(1, 5))
            a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            H = Hamiltonian((a + a.conj().T) / 2)
            w = rng.random(d)
            U = _unitary(rng, d)
            rho = DensityOperator(U @ np.diag(w / w.sum()) @ U.conj().T)
            fams = tuple(ProjectorFamily.from_basis(_unitary(rng, d)) for _ in range(n))
            times = np.cumsum(rng.random(n) + 0.05)
            chain = HistoryChain(fams, [(i, int(rng.integers(d)), t) for i, t in enumerate(times)])
            r = chain_probabilities(rho, H, chain)
            assert r.residual < 1e-12
            for k in range(n):
                prefix = chain.prefix(k)
                table = exhaustive_scan(rho, H, prefix, k, times[k])
                assert abs(sum(table.values()) - chain_probability(rho, H, prefix)) < 1e-12


@pytest.mark.acceptance(6, "time-ordering enforcement")
def test_time_ordering():
    rng = np.random.default_rng(6)
    fam = ProjectorFamily.computational(3)
    H = Hamiltonian(np.diag([0.0, 1.0, 2.5]))
    P = fam[0]
    with Budget(1.0):
        attempts = raised = 0
        for _ in range(100):
            n = int(rng.integers(2, 6))
            times = np.sort(rng.random(n))
            i, j = sorted(rng.choice(n, 2, replace=False))
            times[[i, j]] = times[[j, i]]
            if rng.random() < 0.3:
                times[j] = times[i]
            steps = [(0, int(rng.integers(3)), t) for t in times]
            attempts += 1
            try:
                HistoryChain((fam,), steps)
            except TimeOrderViolation:
                raised += 1
        for t_from, t_to in rng.uniform(0, 10, size=(100, 2)):
            t_to = min(t_from, t_to)
            attempts += 1
            try:
                evolve_projector(P, H, t_from, t_to)
            except TimeOrderViolation:
                raised += 1
        assert raised == attempts


@pytest.mark.acceptance(7, "decay-vertex fit recovers the width")
def test_kaon_fit():
    cfg = BeamConfig(1.0, 1.0, 100_000, seed=20240601)
    with Budget(10.0):
        sample = inject_noise(sample_decays(cfg, 1.0), [-0.1, -0.02, -3.0, -1e-6])
        fit = fit_lifetime(sample, (0.1, 5.0))
        assert abs(fit.gamma_hat - 1.0) < 3 * fit.stderr
        h = histogram(sample, (0.1, 5.0), 0.1, cfg)
        assert h.noise_rejected == 4
        assert h.edges[0] >= 0
        assert h.counts.sum() + h.noise_rejected + h.out_of_window == len(sample)
        chi2, n_bins = chi_square(h, 1.0)
        assert chi2 / n_bins < 2


@pytest.mark.acceptance(8, "Breit-Wigner line shape and delta concentration")
def test_breit_wigner():
    with Budget(5.0):
        g = GamowState(POLE)
        assert gamow_energy_density(g, g.e_r) == pytest.approx(2 / (math.pi * g.gamma), rel=1e-14)
        for e in (g.e_r - g.gamma / 2, g.e_r + g.gamma / 2):
            assert gamow_energy_density(g, e) == pytest.approx(1 / (math.pi * g.gamma), rel=1e-14)
        norm, _ = integrate(lambda e: gamow_energy_density(g, e, True), -math.inf, math.inf,
                            epsrel=1e-12)
        assert abs(norm - 1) < 1e-8
        report = born_limit_check([GamowState.from_values(1.0, r) for r in (1e-1, 1e-2, 1e-3)])
        assert report.outside_mass_decreasing and report.norms_unit and report.golden_rule_anchor


@pytest.mark.acceptance(9, "S-matrix unitarity and pole recovery")
def test_s_matrix():
    rng = np.random.default_rng(9)
    with Budget(2.0):
        for n in range(1, 6):
            for _ in range(10):
                centres = np.sort(rng.choice(np.arange(1, 30), n, replace=False)).astype(float)
                pairs = [(e + rng.uniform(-0.3, 0.3), rng.uniform(0.05, 0.8)) for e in centres]
                m = SMatrixModel.from_poles(*pairs, background=tuple(rng.normal(0, 0.05, 3)))
                e = np.linspace(-10, 40, 2001)
                assert np.max(np.abs(np.abs(eval_s_matrix(m, e)) - 1)) < 1e-12
                seeds = [z + 0.03 * abs(z.imag) * (1 - 1j) for z in m.positions]
                found = find_poles(m, seeds)
                expected = sorted(m.positions, key=lambda z: (z.real, z.imag))
                assert max(abs(a - b) for a, b in zip(found, expected)) < 1e-10
