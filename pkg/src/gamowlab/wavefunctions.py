"""Energy wavefunctions of prepared states and registered observables.

Wavefunctions are parametric analytic functions of the energy::

    f(E) = E**p * N(E) / prod_k (E - p_k)

with ``p = 0`` (``rational-decay``) or ``p = ell + 1/2``
(``rational-with-threshold-factor``, principal branch).  Prepared states must
be Hardy-class in the lower half-plane (all poles above the real axis),
registered observables in the upper half-plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InvalidParameter, PoleEvaluation, ZeroNorm
from .quadrature import integrate

KINDS = ("rational-decay", "rational-with-threshold-factor")
HALFPLANES = ("lower", "upper")
SUPPORTS = ("half-line", "extended")

PROBE_OFFSETS = (0.5j, 1 + 0.5j, 2 + 1j)


def _threshold(z, power, side=0):
    """``z**power`` on the principal branch.

    ``side`` = +1 / -1 selects the boundary value from above / below on the
    negative real axis; 0 leaves numpy's principal value.
    """
    z = np.asarray(z, dtype=complex)
    if power == 0:
        return np.ones_like(z)
    out = z ** power
    if side:
        neg = (z.imag == 0) & (z.real < 0)
        out = np.where(neg, np.abs(z) ** power * np.exp(1j * math.pi * power * side), out)
    return out


@dataclass(frozen=True)
class EnergyWaveFunction:
    """A rational (optionally threshold-weighted) energy wavefunction.

    ``numerator`` lists polynomial coefficients, highest degree first.
    ``support`` is the energy range the state lives on: ``"half-line"`` is
    the physical spectrum [0, inf); ``"extended"`` is the whole line reached
    by continuing onto the second sheet below threshold, which is where the
    Breit-Wigner pole term lives.
    """

    kind: str
    numerator: tuple[complex, ...]
    poles: tuple[complex, ...]
    halfplane: str = "lower"
    ell: int = 0
    support: str = "half-line"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.halfplane not in HALFPLANES:
            raise InvalidParameter(f"halfplane must be one of {HALFPLANES}")
        if self.support not in SUPPORTS:
            raise InvalidParameter(f"support must be one of {SUPPORTS}")
        if int(self.ell) != self.ell or self.ell < 0:
            raise InvalidParameter("ell must be a non-negative integer")
        num = [complex(c) for c in self.numerator]
        while len(num) > 1 and num[0] == 0:
            num.pop(0)
        if not num:
            raise InvalidParameter("numerator is empty")
        poles = tuple(complex(p) for p in self.poles)
        if not all(np.isfinite(c) for c in num + list(poles)):
            raise InvalidParameter("coefficients and poles must be finite")
        for i in range(len(poles)):
            for j in range(i):
                if abs(poles[i] - poles[j]) <= 1e-12 * max(1.0, abs(poles[i])):
                    raise InvalidParameter("poles must be distinct (simple poles only)")
        for p in poles:
            if p.imag == 0 and (p.real >= 0 or self.support == "extended"):
                raise InvalidParameter(f"pole {p} lies on the support")
        if self.kind == "rational-with-threshold-factor" and self.support == "extended":
            raise InvalidParameter("threshold factor has a cut on the negative axis; "
                                   "extended support is not available")
        degree = len(num) - 1 if any(num) else -1
        if len(poles) - degree - self.threshold_power < 1:
            raise InvalidParameter("wavefunction must decay at least as |E|**-1")
        object.__setattr__(self, "numerator", tuple(num))
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "ell", int(self.ell))

    # construction helpers

    @classmethod
    def lorentzian(cls, a: float, b: float, c: complex = 1.0, halfplane="lower"):
        """``c / ((E - a)**2 + b**2)``, pole pair at ``a +- i b``."""
        return cls("rational-decay", (c,), (complex(a, b), complex(a, -b)), halfplane)

    @classmethod
    def pole_term(cls, pole, support="extended"):
        """Breit-Wigner amplitude ``sqrt(G/2pi) / (E - conj(z_R))``.

        Its squared modulus is the normalised Breit-Wigner density; the pole
        of the amplitude sits at ``conj(z_R)`` so that the state is Hardy in
        the lower half-plane.
        """
        amp = math.sqrt(pole.gamma / (2 * math.pi))
        return cls("rational-decay", (amp,), (np.conj(pole.position),), "lower",
                   support=support)

    @classmethod
    def from_residues(cls, residues: Sequence[complex], poles: Sequence[complex],
                      halfplane="lower", kind="rational-decay", ell=0):
        """``sum_k r_k / (E - p_k)`` (times the threshold factor, if any)."""
        if len(residues) != len(poles):
            raise InvalidParameter("residues and poles differ in length")
        num = np.zeros(1, dtype=complex)
        for k, r in enumerate(residues):
            others = [p for j, p in enumerate(poles) if j != k]
            num = np.polyadd(num, r * np.poly(others) if others else np.array([r]))
        return cls(kind, tuple(num), tuple(poles), halfplane, ell)

    def scaled(self, factor: complex) -> "EnergyWaveFunction":
        return replace(self, numerator=tuple(factor * c for c in self.numerator))

    # analytic structure

    @property
    def threshold_power(self) -> float:
        return self.ell + 0.5 if self.kind == "rational-with-threshold-factor" else 0.0

    @property
    def scale(self) -> float:
        return max((abs(p) for p in self.poles), default=1.0) or 1.0

    def _check_poles(self, z):
        for p in self.poles:
            if np.any(np.abs(z - p) <= 4 * np.finfo(float).eps * max(1.0, abs(p))):
                raise PoleEvaluation(f"wavefunction evaluated at its pole {p}")

    def rational_part(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.polyval(np.array(self.numerator), z)
        for p in self.poles:
            out = out / (z - p)
        return out

    def __call__(self, z, side: int = 0):
        z = np.asarray(z, dtype=complex)
        self._check_poles(z)
        return _threshold(z, self.threshold_power, side) * self.rational_part(z)

    def density(self, z):
        """Analytic continuation of ``|f(E)|**2`` off the real axis.

        Equal to ``f(z) * conj(f(conj(z)))``, which is rational in ``z``
        (the threshold factor contributes ``z**(2 ell + 1)``).
        """
        z = np.asarray(z, dtype=complex)
        r = self.rational_part(z)
        rbar = np.conj(self.rational_part(np.conj(z)))
        power = int(round(2 * self.threshold_power))
        return z ** power * r * rbar if power else r * rbar

    def residues(self) -> np.ndarray:
        """Residues of the rational part at each pole (simple poles)."""
        out = []
        for k, p in enumerate(self.poles):
            denom = np.prod([p - q for j, q in enumerate(self.poles) if j != k])
            out.append(np.polyval(np.array(self.numerator), p) / denom)
        return np.array(out, dtype=complex)

    def support_interval(self) -> tuple[float, float]:
        return (0.0, math.inf) if self.support == "half-line" else (-math.inf, math.inf)


@dataclass(frozen=True)
class HardyReport:
    max_dispersion_residual: float
    wrong_halfplane_max: float
    probe_points: tuple[complex, ...]
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "max_dispersion_residual": self.max_dispersion_residual,
            "wrong_halfplane_max": self.wrong_halfplane_max,
            "probe_points": [[z.real, z.imag] for z in self.probe_points],
            "passed": self.passed,
            "tol": self.tol,
        }


def eval_wavefunction(f: EnergyWaveFunction, z):
    """Value of the analytic continuation of ``f`` at ``z``."""
    out = f(z)
    return complex(out) if np.ndim(out) == 0 else out


def norm_squared(f: EnergyWaveFunction) -> float:
    """``int |f(E)|**2 dE`` over the support of ``f``."""
    lo, hi = f.support_interval()
    val, _ = integrate(lambda e: np.abs(f.rational_part(e)) ** 2 * np.abs(e) ** (2 * f.threshold_power),
                       lo, hi, epsabs=1e-300, epsrel=1e-13)
    return float(np.real(val))


def normalize(f: EnergyWaveFunction) -> EnergyWaveFunction:
    n2 = norm_squared(f)
    if not n2 > 1e-300:
        raise ZeroNorm("wavefunction has zero norm")
    return f.scaled(1.0 / math.sqrt(n2))


def cauchy_integral(f: EnergyWaveFunction, z0: complex, side: int, *, epsabs=1e-12) -> complex:
    """``(1/2 pi i) int_R f(E + side*i0) / (E - z0) dE`` over the whole real line."""
    z0 = complex(z0)

    def integrand(e):
        return f(e, side=side) / (e - z0)

    val, _ = integrate(integrand, -math.inf, math.inf, epsabs=epsabs, epsrel=1e-10)
    return complex(val) / (2j * math.pi)


def probe_points(f: EnergyWaveFunction, halfplane: str) -> tuple[complex, ...]:
    sign = 1 if halfplane == "upper" else -1
    return tuple(f.scale * complex(z.real, sign * z.imag) for z in PROBE_OFFSETS)


def hardy_check(f: EnergyWaveFunction, tol: float = 1e-6) -> HardyReport:
    """Numerical Hardy-class test for the declared half-plane of ``f``.

    For probe points ``z0`` in the declared half-plane the Cauchy
    representation ``f(z0) = +-(1/2 pi i) int f(E)/(E - z0) dE`` is
    checked; at mirror-image probes in the opposite half-plane the same
    integral must vanish.  Boundary values are taken from the declared
    side of the real axis.
    """
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    sign = 1 if f.halfplane == "upper" else -1
    inside = probe_points(f, f.halfplane)
    outside = tuple(z.conjugate() for z in inside)
    if any(p.imag == 0 for p in f.poles):
        return HardyReport(math.inf, math.inf, inside + outside, False, tol)
    epsabs = tol / 100
    residual = 0.0
    for z0 in inside:
        try:
            value = complex(f(z0))
        except PoleEvaluation:
            residual = math.inf
            continue
        residual = max(residual, abs(value - sign * cauchy_integral(f, z0, sign, epsabs=epsabs)))
    wrong = max(abs(cauchy_integral(f, z0, sign, epsabs=epsabs)) for z0 in outside)
    passed = residual < tol and wrong < tol
    return HardyReport(float(residual), float(wrong), inside + outside, bool(passed), tol)
