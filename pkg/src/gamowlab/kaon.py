"""Monte Carlo decay-vertex experiment for a beam of unstable particles.

Particles are created instantaneously at a target at ``t0 = 0``, fly with
fixed momentum ``p`` and decay after an exponentially distributed proper
time.  The decay vertex sits at lab distance ``d = t p / m``.  Vertices are
binned back into proper time, and the width is fitted by maximum likelihood
on a truncated window.

Random numbers come from one PCG64 stream per fixed-size chunk of events,
derived from the run seed with ``SeedSequence.spawn``, so the event list is
identical for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (DomainError, InsufficientData, InvalidParameter, NonConvergence)
from .gamow_core import GamowState, decay_probability
from .resonance_model import DEFAULT_CHANNEL

CHUNK = 1 << 16
MIN_EVENTS = 100
SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class BeamConfig:
    momentum_p: float
    mass_m: float
    n_events: int
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.momentum_p) and self.momentum_p > 0):
            raise InvalidParameter("momentum_p must be > 0")
        if not (math.isfinite(self.mass_m) and self.mass_m > 0):
            raise InvalidParameter("mass_m must be > 0")
        if int(self.n_events) != self.n_events or self.n_events < 1:
            raise InvalidParameter("n_events must be a positive integer")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise InvalidParameter("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "n_events", int(self.n_events))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def boost(self) -> float:
        """``p / m`` (beta * gamma)."""
        return self.momentum_p / self.mass_m


@dataclass(frozen=True)
class DecayEvent:
    proper_time: float
    lab_distance: float
    channel: str


@dataclass(frozen=True, eq=False)
class DecaySample:
    """Events stored column-wise.

    ``injected`` marks synthetic entries added by :func:`inject_noise`; these
    carry a lab distance only (their proper time is NaN).
    """

    proper_time: np.ndarray
    lab_distance: np.ndarray
    channel_index: np.ndarray
    channels: tuple[str, ...]
    injected: np.ndarray

    def __len__(self):
        return self.proper_time.size

    def __getitem__(self, i: int) -> DecayEvent:
        return DecayEvent(float(self.proper_time[i]), float(self.lab_distance[i]),
                          self.channels[self.channel_index[i]])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other):
        if not isinstance(other, DecaySample):
            return NotImplemented
        return (self.channels == other.channels
                and np.array_equal(self.proper_time, other.proper_time, equal_nan=True)
                and np.array_equal(self.lab_distance, other.lab_distance)
                and np.array_equal(self.channel_index, other.channel_index)
                and np.array_equal(self.injected, other.injected))

    def decays(self) -> "DecaySample":
        keep = ~self.injected
        return DecaySample(self.proper_time[keep], self.lab_distance[keep],
                           self.channel_index[keep], self.channels, self.injected[keep])


def _branching(branching: Mapping[str, float] | None):
    if branching is None:
        branching = {DEFAULT_CHANNEL: 1.0}
    names = tuple(str(k) for k in branching)
    probs = np.array([float(v) for v in branching.values()])
    if not names or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise InvalidParameter(f"invalid branching map {dict(branching)}")
    return names, probs / probs.sum()


def _chunk(seed_seq: np.random.SeedSequence, size: int, gamma: float, probs: np.ndarray):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    u = rng.random(size)
    t = -np.log1p(-u) / gamma
    ch = rng.choice(probs.size, size=size, p=probs) if probs.size > 1 \
        else np.zeros(size, dtype=np.int64)
    return t, ch


def sample_decays(cfg: BeamConfig, gamma: float = 1.0,
                  branching: Mapping[str, float] | None = None,
                  workers: int = 1) -> DecaySample:
    """Draw ``cfg.n_events`` decays with exponential proper-time law.

    Parameters
    ----------
    cfg : BeamConfig
    gamma : float
        Total width (inverse mean lifetime), > 0.
    branching : mapping, optional
        Channel fractions; defaults to the single two-pion channel.
    workers : int
        Threads used for generation.  The result does not depend on it.
    """
    if not (math.isfinite(gamma) and gamma > 0):
        raise InvalidParameter("gamma must be > 0")
    if workers < 1:
        raise InvalidParameter("workers must be >= 1")
    names, probs = _branching(branching)
    n = cfg.n_events
    n_chunks = -(-n // CHUNK)
    seqs = np.random.SeedSequence(cfg.seed).spawn(n_chunks)
    sizes = [min(CHUNK, n - k * CHUNK) for k in range(n_chunks)]
    if workers == 1 or n_chunks == 1:
        parts = [_chunk(s, m, gamma, probs) for s, m in zip(seqs, sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _chunk(a[0], a[1], gamma, probs), zip(seqs, sizes)))
    t = np.concatenate([p[0] for p in parts])
    ch = np.concatenate([p[1] for p in parts]).astype(np.int64)
    return DecaySample(t, t * cfg.boost, ch, names, np.zeros(n, dtype=bool))


def to_lab_distance(t, cfg: BeamConfig):
    """Lab-frame vertex distance ``t p / m`` of a decay at proper time ``t``."""
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr >= 0)):
        raise DomainError("proper time must be >= 0: nothing decays before creation")
    out = arr * cfg.boost
    return float(out) if out.ndim == 0 else out


def inject_noise(sample: DecaySample, distances: Sequence[float],
                 channel: str = "noise") -> DecaySample:
    """Append synthetic vertices at the given lab distances (e.g. upstream of the target)."""
    d = np.asarray(distances, dtype=float).ravel()
    channels = sample.channels if channel in sample.channels else sample.channels + (channel,)
    idx = channels.index(channel)
    return DecaySample(
        np.concatenate([sample.proper_time, np.full(d.size, np.nan)]),
        np.concatenate([sample.lab_distance, d]),
        np.concatenate([sample.channel_index, np.full(d.size, idx, dtype=np.int64)]),
        channels,
        np.concatenate([sample.injected, np.ones(d.size, dtype=bool)]),
    )


@dataclass(frozen=True, eq=False)
class CountingHistogram:
    """Counts per proper-time bin; ``edges`` has one more entry than ``counts``."""

    edges: np.ndarray
    counts: np.ndarray
    noise_rejected: int = 0
    out_of_window: int = 0

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        c = np.asarray(self.counts, dtype=np.int64)
        if e.ndim != 1 or e.size != c.size + 1 or np.any(np.diff(e) <= 0):
            raise InvalidParameter("edges must be increasing with len(counts) + 1 entries")
        if np.any(c < 0) or self.noise_rejected < 0 or self.out_of_window < 0:
            raise InvalidParameter("counts must be non-negative")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "counts", c)

    @property
    def n_events(self) -> int:
        return int(self.counts.sum()) + self.noise_rejected + self.out_of_window

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def bin_width(self) -> float:
        return float(self.widths[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def rate(self) -> np.ndarray:
        """Counting rate ``dN/dt`` per bin."""
        return self.counts / self.widths

    @property
    def rate_error(self) -> np.ndarray:
        return np.sqrt(self.counts) / self.widths

    def __add__(self, other: "CountingHistogram") -> "CountingHistogram":
        if not isinstance(other, CountingHistogram):
            return NotImplemented
        if not np.array_equal(self.edges, other.edges):
            raise InvalidParameter("cannot merge histograms with different binning")
        return CountingHistogram(self.edges, self.counts + other.counts,
                                 self.noise_rejected + other.noise_rejected,
                                 self.out_of_window + other.out_of_window)


def _edges(t_min: float, t_max: float, bin_width: float) -> np.ndarray:
    n = max(1, math.ceil((t_max - t_min) / bin_width - 1e-9))
    e = t_min + bin_width * np.arange(n + 1)
    e[-1] = t_max
    return e


def histogram(events: DecaySample, window: tuple[float, float], bin_width: float,
              cfg: BeamConfig) -> CountingHistogram:
    """Bin vertices inside the lab-distance ``window`` by proper time.

    Vertices upstream of the target (negative distance) cannot come from a
    decay of a particle created there; they are counted in
    ``noise_rejected`` and never binned.  ``bin_width`` is in proper time;
    the last bin is shortened if the window is not a whole number of bins.
    """
    d_min, d_max = float(window[0]), float(window[1])
    if not (math.isfinite(d_min) and math.isfinite(d_max)) or d_max <= d_min:
        raise InvalidParameter("window must be a finite interval [d_min, d_max]")
    if d_min < 0:
        raise DomainError("the physical window starts at or after the target (d_min >= 0)")
    if not (math.isfinite(bin_width) and bin_width > 0):
        raise InvalidParameter("bin_width must be > 0")
    d = events.lab_distance
    noise = d < 0
    t = np.where(noise, np.nan, d / cfg.boost)
    edges = _edges(d_min / cfg.boost, d_max / cfg.boost, bin_width)
    inside = ~noise & (d >= d_min) & (d <= d_max)
    idx = np.clip(np.searchsorted(edges, t[inside], side="right") - 1, 0, edges.size - 2)
    counts = np.bincount(idx, minlength=edges.size - 1)
    return CountingHistogram(edges, counts, int(noise.sum()), int((~noise & ~inside).sum()))


# lifetime fit

@dataclass(frozen=True)
class FitResult:
    gamma_hat: float
    stderr: float
    log_likelihood: float
    n_used: int
    method: str


def _q(x):
    # e^x / expm1(x)^2, finite for large x
    return 1.0 / (np.expm1(x) * -np.expm1(-x))


def _tail(x, length):
    # length / expm1(x * length), -> 1/x as length -> inf
    if math.isinf(length):
        return 0.0
    return length / math.expm1(x * length)


def _solve(score, guess: float) -> float:
    lo, hi = guess, guess
    for _ in range(200):
        if score(lo) > 0:
            break
        lo *= 0.5
    else:
        raise NonConvergence("could not bracket the likelihood maximum from below")
    for _ in range(200):
        if score(hi) < 0:
            break
        hi *= 2.0
    else:
        raise NonConvergence("could not bracket the likelihood maximum from above")
    if lo == hi:
        return lo
    return brentq(score, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def _fit_unbinned(t: np.ndarray, a: float, b: float) -> FitResult:
    t = t[(t >= a) & (t <= b)]
    n = t.size
    if n < MIN_EVENTS:
        raise InsufficientData(f"{n} events in window, need at least {MIN_EVENTS}")
    length = b - a
    y = float(np.mean(t - a))
    if not (y > 0 and (math.isinf(length) or y < 0.5 * length)):
        raise NonConvergence("sample mean leaves no interior likelihood maximum")

    # score / n = h(G) - y with h(G) = 1/G - L/expm1(G L), decreasing in G
    def score(g):
        return 1.0 / g - _tail(g, length) - y

    g = _solve(score, 1.0 / y)
    info = n / g ** 2 - (0.0 if math.isinf(length) else n * length ** 2 * _q(g * length))
    if not info > 0:
        raise NonConvergence("observed information is not positive")
    log_z = -g * a + (0.0 if math.isinf(length) else math.log(-math.expm1(-g * length)))
    loglik = n * math.log(g) - g * float(t.sum()) - n * log_z
    return FitResult(float(g), float(1.0 / math.sqrt(info)), float(loglik), int(n), "unbinned")


def _fit_binned(h: CountingHistogram) -> FitResult:
    n_k = h.counts.astype(float)
    n = int(n_k.sum())
    if n < MIN_EVENTS:
        raise InsufficientData(f"{n} events in window, need at least {MIN_EVENTS}")
    a = h.edges[0]
    length = h.edges[-1] - a
    lo, w = h.edges[:-1] - a, h.widths

    def score(g):
        return float(np.sum(n_k * (-lo + w / np.expm1(g * w))) - n * _tail(g, length))

    centers = h.centers - a
    g = _solve(score, 1.0 / max(float(np.sum(n_k * centers)) / n, 1e-300))
    info = float(np.sum(n_k * w ** 2 * _q(g * w))) - n * length ** 2 * float(_q(g * length))
    if not info > 0:
        raise NonConvergence("observed information is not positive")
    log_p = -g * lo + np.log(-np.expm1(-g * w)) - math.log(-math.expm1(-g * length))
    loglik = float(np.sum(n_k[n_k > 0] * log_p[n_k > 0]))
    return FitResult(float(g), float(1.0 / math.sqrt(info)), loglik, n, "binned")


def fit_lifetime(data, window: tuple[float, float] | None = None) -> FitResult:
    """Maximum-likelihood width for exponential decays seen in a time window.

    Parameters
    ----------
    data : DecaySample or CountingHistogram
        Unbinned events use the truncated-exponential density
        ``G exp(-G t) / (exp(-G a) - exp(-G b))`` on ``[a, b]``; histograms
        use the multinomial likelihood of the bin contents.
    window : (a, b), optional
        Proper-time window for unbinned data; ``b`` may be ``inf``.
        Defaults to ``(0, inf)``.  Ignored for histograms.

    Returns
    -------
    FitResult
        ``stderr`` is the inverse square root of the observed information.
    """
    if isinstance(data, CountingHistogram):
        return _fit_binned(data)
    if not isinstance(data, DecaySample):
        raise InvalidParameter("fit_lifetime expects a DecaySample or CountingHistogram")
    a, b = (0.0, math.inf) if window is None else (float(window[0]), float(window[1]))
    if not (a >= 0 and b > a):
        raise InvalidParameter("window must satisfy 0 <= a < b")
    return _fit_unbinned(data.decays().proper_time, a, b)


def chi_square(h: CountingHistogram, gamma: float, n_total: int | None = None):
    """Pearson chi-square of the bin counts against the exponential decay law.

    Expected counts are ``n_total`` times the decay probability accumulated
    in each bin.  ``n_total`` defaults to all real (non-noise) events.

    Returns
    -------
    (chi2, n_bins)
    """
    if n_total is None:
        n_total = int(h.counts.sum()) + h.out_of_window
    state = GamowState.from_values(1.0, gamma)
    cum = decay_probability(state, DEFAULT_CHANNEL, h.edges)
    expected = n_total * np.diff(cum)
    if np.any(expected <= 0):
        raise InvalidParameter("bins with zero expected count")
    chi2 = float(np.sum((h.counts - expected) ** 2 / expected))
    return chi2, int(h.counts.size)


@dataclass(frozen=True)
class PhysicalPreset:
    """Report-only physical units: mean lifetime in seconds, p and m in one unit."""

    tau_s: float = 1e-10
    momentum_p: float = 1.0
    mass_m: float = 0.5

    def report(self, fit: FitResult) -> dict:
        tau = self.tau_s / fit.gamma_hat
        return {
            "tau_s": tau,
            "tau_stderr_s": self.tau_s * fit.stderr / fit.gamma_hat ** 2,
            "mean_decay_length_m": SPEED_OF_LIGHT * tau * self.momentum_p / self.mass_m,
        }
