"""Rational S-matrix models with resonance poles.

A model is a finite Blaschke-type product over its resonances times a
polynomial-phase background::

    S(z) = exp(i * sum_k a_k z**k) * prod_j (z - conj(z_j)) / (z - z_j)

with ``z_j = E_j - i Gamma_j / 2``.  With real ``a_k`` every factor has unit
modulus on the real axis.  The rational formula is the continuation of the
physical boundary value ``S(E + i0)`` downward through the cut, i.e. the
second sheet in the lower half-plane and the first sheet in the upper.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import (DuplicateRoot, InvalidParameter, NoConvergence, PoleEvaluation,
                     UnknownChannel)

DEFAULT_CHANNEL = "pi+pi-"
MAX_NEWTON_ITER = 100


def complex_energy(z) -> complex:
    """Coerce ``z`` to a finite complex energy."""
    try:
        z = complex(z)
    except (TypeError, ValueError) as exc:
        raise InvalidParameter(f"not a complex energy: {z!r}") from exc
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidParameter(f"complex energy must be finite, got {z!r}")
    return z


@dataclass(frozen=True)
class ResonancePole:
    """Resonance at ``e_r - i*gamma/2`` with channel branching fractions."""

    e_r: float
    gamma: float
    branching: Mapping[str, float] = field(
        default_factory=lambda: {DEFAULT_CHANNEL: 1.0})

    def __post_init__(self):
        e_r, gamma = float(self.e_r), float(self.gamma)
        if not (math.isfinite(e_r) and e_r > 0):
            raise InvalidParameter(f"e_r must be > 0, got {self.e_r!r}")
        if not (math.isfinite(gamma) and gamma > 0):
            raise InvalidParameter(
                f"gamma must be > 0, got {self.gamma!r}; the stable limit is "
                "only reachable through born_limit_check")
        branching = {str(k): float(v) for k, v in dict(self.branching).items()}
        if not branching:
            raise InvalidParameter("branching map is empty")
        if any(not (0.0 <= v <= 1.0) for v in branching.values()):
            raise InvalidParameter(f"branching fractions must lie in [0, 1]: {branching}")
        if abs(sum(branching.values()) - 1.0) > 1e-12:
            raise InvalidParameter(f"branching fractions must sum to 1: {branching}")
        object.__setattr__(self, "e_r", e_r)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "branching", MappingProxyType(branching))

    def __hash__(self):
        return hash((self.e_r, self.gamma, tuple(sorted(self.branching.items()))))

    @property
    def position(self) -> complex:
        return complex(self.e_r, -0.5 * self.gamma)

    def partial_width(self, channel: str) -> float:
        try:
            return self.branching[channel] * self.gamma
        except KeyError:
            raise UnknownChannel(
                f"channel {channel!r} not in {sorted(self.branching)}") from None


@dataclass(frozen=True)
class SMatrixModel:
    poles: tuple[ResonancePole, ...]
    background: tuple[float, ...] = ()

    def __post_init__(self):
        poles = tuple(self.poles)
        for p in poles:
            if not isinstance(p, ResonancePole):
                raise InvalidParameter(f"expected ResonancePole, got {type(p).__name__}")
        bg = tuple(float(a) for a in self.background)
        if not all(math.isfinite(a) for a in bg):
            raise InvalidParameter("background coefficients must be finite reals")
        pos = [p.position for p in poles]
        for i in range(len(pos)):
            for j in range(i):
                if abs(pos[i] - pos[j]) <= 1e-12 * max(1.0, abs(pos[i])):
                    raise InvalidParameter(f"coincident poles at {pos[i]}")
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "background", bg)

    @classmethod
    def from_poles(cls, *pairs: tuple[float, float], background=()) -> "SMatrixModel":
        """Shorthand: ``SMatrixModel.from_poles((1.0, 0.1), (3.0, 0.2))``."""
        return cls(tuple(ResonancePole(e, g) for e, g in pairs), tuple(background))

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.position for p in self.poles], dtype=complex)

    def _phase(self, z):
        # polyval wants highest degree first
        return np.polyval(self.background[::-1], z) if self.background else 0.0 * z

    def _phase_derivative(self, z):
        if len(self.background) < 2:
            return 0.0 * z
        deriv = [k * a for k, a in enumerate(self.background)][1:]
        return np.polyval(deriv[::-1], z)

    def rational(self, z):
        """The rational formula itself, vectorised, without pole checks."""
        z = np.asarray(z, dtype=complex)
        out = np.exp(1j * self._phase(z))
        for zp in self.positions:
            out = out * (z - np.conj(zp)) / (z - zp)
        return out


def eval_s_matrix(model: SMatrixModel, z, sheet: str | None = None):
    """Evaluate the model S-matrix at complex energy ``z``.

    Parameters
    ----------
    model : SMatrixModel
    z : complex or array_like
    sheet : {None, "second", "physical"}
        ``None`` evaluates the rational continuation formula everywhere.
        ``"second"`` returns the second-sheet function, which carries the
        pole pair ``z_R`` and ``conj(z_R)``; ``"physical"`` returns the
        first-sheet function, which carries the matching zeros.  Both are
        obtained from the rational formula by Schwarz reflection in the
        half-plane where that formula belongs to the other sheet.

    Raises
    ------
    PoleEvaluation
        If ``z`` coincides with a pole to machine precision.
    """
    scalar = np.ndim(z) == 0
    if scalar:
        z = complex_energy(z)
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    if sheet not in (None, "second", "physical"):
        raise InvalidParameter(f"unknown sheet {sheet!r}")
    if sheet is None:
        reflect = np.zeros(zz.shape, dtype=bool)
    elif sheet == "second":
        reflect = zz.imag > 0
    else:
        reflect = zz.imag < 0
    w = np.where(reflect, np.conj(zz), zz)
    eps = 4 * np.finfo(float).eps
    for zp in model.positions:
        if np.any(np.abs(w - zp) <= eps * max(1.0, abs(zp))):
            raise PoleEvaluation(f"S-matrix evaluated at its pole {zp}")
    out = model.rational(w)
    out = np.where(reflect, np.conj(out), out)
    return complex(out[0]) if scalar else out


def find_poles(model: SMatrixModel, seeds: Sequence[complex], tol: float = 1e-10,
               max_iter: int = MAX_NEWTON_ITER) -> list[complex]:
    """Locate S-matrix poles by Newton iteration on ``1/S``.

    The Newton step uses the analytic logarithmic derivative of the rational
    form, so ``z - (1/S)/(1/S)'`` is evaluated without forming ``1/S``.
    Iteration stops when the step falls below ``tol * max(|z|, 1)``.
    """
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    positions = model.positions
    roots = []
    for seed in seeds:
        z = complex_energy(seed)
        for _ in range(max_iter):
            if np.any(positions == z):
                break
            # d/dz log(1/S)
            dlog = complex(np.sum(1.0 / (z - positions) - 1.0 / (z - np.conj(positions))))
            dlog -= 1j * complex(model._phase_derivative(z))
            if dlog == 0 or not cmath.isfinite(dlog):
                raise NoConvergence(f"Newton derivative degenerate at {z}")
            step = 1.0 / dlog
            z = z - step
            if not cmath.isfinite(z):
                raise NoConvergence(f"Newton iteration diverged from seed {seed}")
            if abs(step) < tol * max(abs(z), 1.0):
                break
        else:
            raise NoConvergence(
                f"no convergence from seed {seed} within {max_iter} iterations")
        inv_s = 1.0 / eval_s_matrix(model, z) if not np.any(positions == z) else 0.0
        if abs(inv_s) >= tol:
            raise NoConvergence(f"|1/S| = {abs(inv_s):.3e} at {z} exceeds tol")
        roots.append(z)
    roots.sort(key=lambda r: (r.real, r.imag))
    for a, b in zip(roots, roots[1:]):
        if abs(a - b) <= 10 * tol * max(1.0, abs(a)):
            raise DuplicateRoot(f"two seeds converged to the same pole near {a}")
    return roots
