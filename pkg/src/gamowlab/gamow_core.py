"""Gamow states, semigroup evolution and the pole-plus-background expansion.

Units: hbar = 1, energies and times dimensionless.

The expansion implemented by :func:`decompose` is the contour deformation of
the survival amplitude of a prepared state ``f``::

    A(t) = int_support |f(E)|**2 exp(-iEt) dE
         = sum_i c_i exp(-i z_i t) + B(t)            (t >= 0)

The real-axis integral is rotated clockwise through the lower half-plane
onto a ray below the negative real axis.  Every resonance pole ``z_i`` swept
over contributes a Gamow term with coefficient ``c_i = -2 pi i Res``; the
background ``B(t)`` is the integral along the ray plus clockwise loops around
any non-resonant singularities of the continued integrand.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (ContourTooClose, DomainError, InvalidParameter, NotHardy,
                     SemigroupDomain)
from .quadrature import fourier_halfline, integrate
from .resonance_model import ResonancePole, SMatrixModel
from .wavefunctions import EnergyWaveFunction, hardy_check, norm_squared, normalize

NORM_TOL = 1e-8
POLE_MATCH_TOL = 1e-9
MAX_TILT = math.pi / 4


@dataclass(frozen=True)
class GamowState:
    pole: ResonancePole

    @classmethod
    def from_values(cls, e_r: float, gamma: float, branching=None) -> "GamowState":
        if branching is None:
            return cls(ResonancePole(e_r, gamma))
        return cls(ResonancePole(e_r, gamma, branching))

    @property
    def e_r(self) -> float:
        return self.pole.e_r

    @property
    def gamma(self) -> float:
        return self.pole.gamma

    @property
    def position(self) -> complex:
        return self.pole.position

    @property
    def normalization(self) -> float:
        """Factor sqrt(2 pi Gamma) between the Gamow vector and the pole ket."""
        return math.sqrt(2 * math.pi * self.gamma)


@dataclass(frozen=True)
class EvolutionResult:
    t: float
    amplitude: complex
    survival_probability: float


def gamow_energy_density(g: GamowState, E, sheet_extension: bool = False):
    """Breit-Wigner density ``(G/2pi) / ((E - E_R)**2 + (G/2)**2)``.

    Negative energies are only admissible with ``sheet_extension=True``.
    """
    e = np.asarray(E, dtype=float)
    if not sheet_extension and np.any(e < 0):
        raise DomainError("negative energy requires sheet_extension=True")
    half = 0.5 * g.gamma
    out = (g.gamma / (2 * math.pi)) / ((e - g.e_r) ** 2 + half * half)
    return float(out) if out.ndim == 0 else out


def semigroup_evolve(g: GamowState, t: float) -> EvolutionResult:
    """Evolve the Gamow vector forward: ``exp(-i E_R t) exp(-G t / 2)``, t >= 0."""
    t = float(t)
    if not t >= 0:
        raise SemigroupDomain(f"Gamow state evolution is defined for t >= 0 only, got t={t}")
    amp = cmath.exp(-1j * g.e_r * t) * math.exp(-0.5 * g.gamma * t)
    return EvolutionResult(t, amp, math.exp(-g.gamma * t))


def conjugate_semigroup_evolve(g: GamowState, t: float) -> EvolutionResult:
    """Evolve the conjugate Gamow vector (pole at E_R + iG/2); t <= 0 only."""
    t = float(t)
    if not t <= 0:
        raise SemigroupDomain(f"conjugate Gamow evolution is defined for t <= 0 only, got t={t}")
    amp = cmath.exp(-1j * g.e_r * t) * math.exp(0.5 * g.gamma * t)
    return EvolutionResult(t, amp, abs(amp) ** 2)


def _nonnegative_times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr >= 0)):
        raise SemigroupDomain("decay probabilities are defined for t >= 0 only")
    return arr


def decay_probability(g: GamowState, channel: str, t):
    """Probability of having decayed into ``channel`` by time ``t``."""
    arr = _nonnegative_times(t)
    fraction = g.pole.partial_width(channel) / g.gamma
    out = fraction * -np.expm1(-g.gamma * arr)
    return float(out) if np.ndim(out) == 0 else out


def decay_rate(g: GamowState, channel: str, t):
    """Exact Golden-Rule rate ``G_channel * exp(-G t)``."""
    arr = _nonnegative_times(t)
    out = g.pole.partial_width(channel) * np.exp(-g.gamma * arr)
    return float(out) if np.ndim(out) == 0 else out


# stable-particle limit

@dataclass(frozen=True)
class BornLimitRow:
    ratio: float
    window_halfwidth: float
    outside_mass: float
    norm: float
    initial_rates: dict
    partial_widths: dict


@dataclass(frozen=True)
class BornLimitReport:
    rows: tuple[BornLimitRow, ...]

    @property
    def outside_mass_decreasing(self) -> bool:
        m = [r.outside_mass for r in self.rows]
        return all(b < a for a, b in zip(m, m[1:]))

    @property
    def golden_rule_anchor(self) -> bool:
        return all(r.initial_rates == r.partial_widths for r in self.rows)

    @property
    def norms_unit(self) -> bool:
        return all(abs(r.norm - 1.0) < NORM_TOL for r in self.rows)


def born_limit_check(states: Sequence[GamowState]) -> BornLimitReport:
    """Track the Breit-Wigner density towards delta(E - E_R) as G/E_R -> 0.

    For every state the mass outside ``E_R +- sqrt(G E_R)`` and the total
    norm are computed by quadrature over the sheet-extended line, and the
    initial rate R(0) is compared with the partial widths.
    """
    ratios = [s.gamma / s.e_r for s in states]
    if len(ratios) < 2 or any(b >= a for a, b in zip(ratios, ratios[1:])):
        raise InvalidParameter("states must have strictly decreasing Gamma/E_R")
    rows = []
    for s in states:
        def dens(e, s=s):
            return gamow_energy_density(s, e, sheet_extension=True)
        w = math.sqrt(s.gamma * s.e_r)
        lo, _ = integrate(dens, -math.inf, s.e_r - w, epsabs=1e-14, epsrel=1e-11)
        hi, _ = integrate(dens, s.e_r + w, math.inf, epsabs=1e-14, epsrel=1e-11)
        total, _ = integrate(dens, -math.inf, math.inf, epsabs=1e-14, epsrel=1e-11)
        rates = {ch: decay_rate(s, ch, 0.0) for ch in s.pole.branching}
        widths = {ch: s.pole.partial_width(ch) for ch in s.pole.branching}
        rows.append(BornLimitRow(s.gamma / s.e_r, w, float(lo + hi), float(total),
                                 rates, widths))
    return BornLimitReport(tuple(rows))


# Hilbert-space baseline

def _check_normalized(f: EnergyWaveFunction):
    n2 = norm_squared(f)
    if abs(n2 - 1.0) > NORM_TOL:
        raise DomainError(f"wavefunction is not normalised (norm^2 = {n2:.12g})")


def _survival(f: EnergyWaveFunction, t: float) -> complex:
    def h(e):
        return float(np.abs(f(e)) ** 2)

    if f.support == "half-line":
        return fourier_halfline(h, t)
    return fourier_halfline(h, t) + fourier_halfline(lambda s: h(-s), -t)


def survival_amplitude_exact(f: EnergyWaveFunction, t):
    """``A(t) = int |f(E)|**2 exp(-iEt) dE`` by real-axis quadrature, any real t.

    This is the unitary-group amplitude; it accepts negative times.
    """
    _check_normalized(f)
    if np.ndim(t) == 0:
        return _survival(f, float(t))
    return np.array([_survival(f, float(x)) for x in np.ravel(t)]).reshape(np.shape(t))


@dataclass(frozen=True)
class HegerfeldtReport:
    times: tuple[float, ...]
    probabilities: tuple[float, ...]
    mirror_probabilities: tuple[float, ...]
    min_probability: float
    positive: bool
    semigroup_rejects: bool | None
    semibounded: bool


def hegerfeldt_demo(f: EnergyWaveFunction, t_grid: Iterable[float],
                    state: GamowState | None = None) -> HegerfeldtReport:
    """Survival probabilities of a semibounded-spectrum state at negative times.

    A state supported on [0, inf) cannot have ``|A(t)|**2`` vanish on a
    half-line, so every probability reported here is strictly positive.  If
    ``state`` is given, ``semigroup_rejects`` records whether the Gamow
    semigroup refuses every one of the same times.  ``semibounded`` is False
    for sheet-extended states, for which the positivity is not a theorem but
    still holds for the pole term (``|A(t)|**2 = exp(-G|t|)``).
    """
    times = tuple(float(t) for t in t_grid)
    if not times or any(t >= 0 for t in times):
        raise DomainError("t_grid must contain negative times only")
    _check_normalized(f)
    probs = tuple(abs(_survival(f, t)) ** 2 for t in times)
    mirror = tuple(abs(_survival(f, -t)) ** 2 for t in times)
    rejects = None
    if state is not None:
        rejects = True
        for t in times:
            try:
                semigroup_evolve(state, t)
            except SemigroupDomain:
                continue
            rejects = False
    low = min(probs)
    return HegerfeldtReport(times, probs, mirror, low, low > 0, rejects,
                            f.support == "half-line")


# complex basis expansion

@dataclass(frozen=True)
class BackgroundContour:
    """Background path: a ray from the origin plus clockwise loops.

    The ray is ``E = -s exp(i theta)``, ``s >= 0``; it is absent for states
    whose support already extends over the whole line.
    """

    wavefunction: EnergyWaveFunction
    theta: float
    has_ray: bool
    loops: tuple[tuple[complex, float], ...] = ()


@dataclass(frozen=True)
class Decomposition:
    gamow_terms: tuple[tuple[GamowState, complex], ...]
    background: BackgroundContour
    model: SMatrixModel = field(repr=False)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.gamow_terms], dtype=complex)

    def pole_amplitude(self, t: float) -> complex:
        """Weisskopf-Wigner part: the pole terms alone."""
        if not t >= 0:
            raise SemigroupDomain("the expansion is defined for t >= 0 only")
        return complex(sum(c * semigroup_evolve(g, t).amplitude for g, c in self.gamow_terms))

    def reconstruct(self, t: float) -> complex:
        return self.pole_amplitude(t) + background_integral(self, t)


def _distance_to_ray(z: complex, theta: float) -> float:
    direction = -cmath.exp(1j * theta)
    s = (z * direction.conjugate()).real
    return abs(z) if s <= 0 else abs(z - s * direction)


def _swept(q: complex, theta: float, has_ray: bool) -> bool:
    if q.imag >= 0:
        return False
    if not has_ray:
        return True
    return cmath.phase(q) > -math.pi + theta


def decompose(f: EnergyWaveFunction, model: SMatrixModel, theta: float = 0.0,
              delta: float = 1e-3, hardy_tol: float = 1e-6) -> Decomposition:
    """Split the survival amplitude of ``f`` into Gamow terms and background.

    Parameters
    ----------
    f : EnergyWaveFunction
        Prepared state; must be Hardy-class in the lower half-plane.  It is
        normalised before use.
    model : SMatrixModel
        Supplies the resonance poles to isolate.  Singularities of the
        continued integrand that are not model poles go into the background.
    theta : float
        Tilt of the background ray below the negative real axis, in
        ``[0, pi/4]``.
    delta : float
        Minimum distance between any singularity and the path.
    """
    if not 0.0 <= theta <= MAX_TILT:
        raise InvalidParameter(f"theta must lie in [0, pi/4], got {theta}")
    if f.halfplane != "lower":
        raise NotHardy("prepared states must be declared Hardy in the lower half-plane")
    report = hardy_check(f, hardy_tol)
    if not report.passed:
        raise NotHardy(f"Hardy check failed: residual {report.max_dispersion_residual:.3e}, "
                       f"wrong half-plane {report.wrong_halfplane_max:.3e}")
    f = normalize(f)
    has_ray = f.support == "half-line"

    amp_poles = np.array(f.poles, dtype=complex)
    rho = f.residues()
    # singularities of |f|^2 continued: the poles of f and their mirror images
    lower = np.conj(amp_poles)
    singular = np.concatenate([amp_poles, lower])
    model_poles = model.positions
    power = int(round(2 * f.threshold_power))

    if has_ray:
        for z in list(singular) + list(model_poles):
            if _distance_to_ray(complex(z), theta) < delta:
                raise ContourTooClose(f"singularity {complex(z)} within {delta} of the ray")

    matched = {}
    for i, zp in enumerate(model_poles):
        hits = np.flatnonzero(np.abs(lower - zp) <= POLE_MATCH_TOL * max(1.0, abs(zp)))
        if hits.size:
            matched[int(hits[0])] = i

    terms = []
    for i, pole in enumerate(model.poles):
        k = next((k for k, j in matched.items() if j == i), None)
        if k is None:
            c = 0j
        else:
            q = lower[k]
            res = (q ** power if power else 1.0) * complex(f.rational_part(q)) * np.conj(rho[k])
            c = complex(-2j * math.pi * res)
        terms.append((GamowState(pole), c))

    loops = []
    others = np.concatenate([singular, model_poles])
    for k, q in enumerate(lower):
        q = complex(q)
        if k in matched or not _swept(q, theta, has_ray):
            continue
        gaps = [abs(q - o) for o in others if abs(q - o) > POLE_MATCH_TOL * max(1.0, abs(q))]
        if has_ray:
            gaps.append(_distance_to_ray(q, theta))
        radius = 0.5 * min(gaps + [abs(q.imag)])
        if radius < delta:
            raise ContourTooClose(f"no room for a loop around singularity {q}")
        loops.append((q, radius))

    contour = BackgroundContour(f, float(theta), has_ray, tuple(loops))
    return Decomposition(tuple(terms), contour, model)


def _ray_integral(c: BackgroundContour, t: float) -> complex:
    g = c.wavefunction.density
    if c.theta == 0.0:
        # int_0^{-inf} g(E) e^{-iEt} dE = int_0^inf -g(-s) e^{ist} ds
        return fourier_halfline(lambda s: -complex(g(-s)), -t)
    direction = -cmath.exp(1j * c.theta)

    def integrand(s):
        e = s * direction
        return g(e) * np.exp(-1j * e * t) * direction

    val, _ = integrate(integrand, 0.0, math.inf, epsabs=1e-12, epsrel=1e-10)
    return complex(val)


def _loop_integral(c: BackgroundContour, center: complex, radius: float, t: float) -> complex:
    g = c.wavefunction.density

    def integrand(phi):
        u = np.exp(-1j * phi)
        e = center + radius * u
        return g(e) * np.exp(-1j * e * t) * (-1j * radius * u)

    val, _ = integrate(integrand, 0.0, 2 * math.pi, epsabs=1e-13, epsrel=1e-10)
    return complex(val)


def background_integral(d: Decomposition, t: float) -> complex:
    """Background amplitude ``B(t)`` by quadrature along the stored contour."""
    t = float(t)
    if not t >= 0:
        raise SemigroupDomain("the background integral is defined for t >= 0 only")
    c = d.background
    total = _ray_integral(c, t) if c.has_ray else 0j
    for center, radius in c.loops:
        total += _loop_integral(c, center, radius, t)
    return complex(total)
