"""Chain probabilities of time-ordered projector histories.

All objects are small dense matrices.  Heisenberg-picture projectors are
obtained by conjugation with ``exp(-iH dt)``, built from the eigenbasis of
the Hermitian Hamiltonian.  Every evolution step must go strictly forward in
time; anything else raises :class:`TimeOrderViolation`.

A chain probability is computed two ways:

* direct: ``Tr(C rho C^dagger)`` with ``C = P_n(t_n) ... P_1(t_1)``;
* recursive: the product of conditional probabilities
  ``Tr(P_k(t_k) rho_eff(t_{k-1}))``, where ``rho_eff`` is renormalised after
  each projection.

The two are algebraically identical; comparing them is a self-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import InvalidParameter, TimeOrderViolation, ZeroBranch

HERMITIAN_TOL = 1e-12
PROJECTOR_TOL = 1e-12
PSD_TOL = 1e-10
ZERO_BRANCH = 1e-14


def _matrix(a, name: str) -> np.ndarray:
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidParameter(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidParameter(f"{name} has non-finite entries")
    m.setflags(write=False)
    return m


def _check_hermitian(m: np.ndarray, name: str):
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(m))):
        raise InvalidParameter(f"{name} is not Hermitian")


def _check_projector(p: np.ndarray, name: str = "projector"):
    _check_hermitian(p, name)
    if np.linalg.norm(p @ p - p) > PROJECTOR_TOL:
        raise InvalidParameter(f"{name} is not idempotent")


def _order(earlier: float, later: float, what: str = "time"):
    if not later > earlier:
        raise TimeOrderViolation(f"{what} {later} does not come strictly after {earlier}")


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _matrix(self.matrix, "density operator")
        _check_hermitian(m, "density operator")
        if abs(np.trace(m).real - 1.0) > 1e-12 or abs(np.trace(m).imag) > 1e-12:
            raise InvalidParameter(f"density operator trace is {np.trace(m)}, not 1")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise InvalidParameter("density operator is not positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityOperator":
        return cls(np.eye(d) / d)

    @classmethod
    def pure(cls, psi) -> "DensityOperator":
        v = np.asarray(psi, dtype=complex).ravel()
        n = np.linalg.norm(v)
        if n == 0:
            raise InvalidParameter("zero state vector")
        v = v / n
        return cls(np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class ProjectorFamily:
    """Mutually orthogonal projectors resolving the identity."""

    projectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        ps = tuple(_matrix(p, "projector") for p in self.projectors)
        if not ps:
            raise InvalidParameter("a projector family needs at least one projector")
        d = ps[0].shape[0]
        if any(p.shape != (d, d) for p in ps):
            raise InvalidParameter("projectors differ in dimension")
        for k, p in enumerate(ps):
            _check_projector(p, f"projector {k}")
        for a in range(len(ps)):
            for b in range(a):
                if np.linalg.norm(ps[a] @ ps[b]) > PROJECTOR_TOL:
                    raise InvalidParameter(f"projectors {b} and {a} are not orthogonal")
        if np.linalg.norm(sum(ps) - np.eye(d)) > PROJECTOR_TOL:
            raise InvalidParameter("projectors do not sum to the identity")
        object.__setattr__(self, "projectors", ps)

    def __len__(self):
        return len(self.projectors)

    def __getitem__(self, alpha: int) -> np.ndarray:
        return self.projectors[alpha]

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @classmethod
    def from_basis(cls, vectors, groups: Sequence[Sequence[int]] | None = None):
        """Spectral projectors onto groups of orthonormal column vectors.

        ``groups`` partitions the column indices; by default every column
        gets its own rank-1 projector.
        """
        v = np.asarray(vectors, dtype=complex)
        if groups is None:
            groups = [[k] for k in range(v.shape[1])]
        return cls(tuple(v[:, list(g)] @ v[:, list(g)].conj().T for g in groups))

    @classmethod
    def computational(cls, d: int):
        return cls.from_basis(np.eye(d))


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    matrix: np.ndarray

    def __post_init__(self):
        m = _matrix(self.matrix, "Hamiltonian")
        _check_hermitian(m, "Hamiltonian")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _eig(self):
        return np.linalg.eigh(self.matrix)

    def propagator(self, dt: float) -> np.ndarray:
        """``exp(-i H dt)``."""
        w, v = self._eig
        return (v * np.exp(-1j * w * dt)) @ v.conj().T


@dataclass(frozen=True)
class HistoryStep:
    family: int
    alternative: int
    time: float


@dataclass(frozen=True, eq=False)
class HistoryChain:
    """Strictly time-ordered steps ``(family index, alternative, time)``."""

    families: tuple[ProjectorFamily, ...]
    steps: tuple[HistoryStep, ...] = ()
    base_time: float = 0.0

    def __post_init__(self):
        fams = tuple(self.families)
        if fams and any(f.dim != fams[0].dim for f in fams):
            raise InvalidParameter("projector families differ in dimension")
        steps = tuple(s if isinstance(s, HistoryStep) else HistoryStep(*s) for s in self.steps)
        previous = float(self.base_time)
        for s in steps:
            if not 0 <= s.family < len(fams):
                raise InvalidParameter(f"unknown family index {s.family}")
            if not 0 <= s.alternative < len(fams[s.family]):
                raise InvalidParameter(
                    f"family {s.family} has no alternative {s.alternative}")
            _order(previous, s.time, "history time")
            previous = s.time
        object.__setattr__(self, "families", fams)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "base_time", float(self.base_time))

    def __len__(self):
        return len(self.steps)

    @property
    def final_time(self) -> float:
        return self.steps[-1].time if self.steps else self.base_time

    def projector(self, k: int) -> np.ndarray:
        s = self.steps[k]
        return self.families[s.family][s.alternative]

    def extended(self, family: int, alternative: int, time: float) -> "HistoryChain":
        return HistoryChain(self.families, self.steps + (HistoryStep(family, alternative, time),),
                            self.base_time)

    def prefix(self, n: int) -> "HistoryChain":
        return HistoryChain(self.families, self.steps[:n], self.base_time)


def evolve_projector(P, H: Hamiltonian, t_from: float, t_to: float) -> np.ndarray:
    """Heisenberg step ``exp(iH dt) P exp(-iH dt)`` with ``dt = t_to - t_from > 0``."""
    _order(t_from, t_to)
    u = H.propagator(t_to - t_from)
    return u.conj().T @ np.asarray(P, dtype=complex) @ u


def _heisenberg(P, H: Hamiltonian, t: float, t0: float) -> np.ndarray:
    return evolve_projector(P, H, t0, t)


def single_probability(rho: DensityOperator, P, t: float, t0: float = 0.0,
                       H: Hamiltonian | None = None) -> float:
    """``Tr(P(t) rho)`` for a single yes-no registration at ``t > t0``.

    With ``H`` omitted the dynamics is trivial.  The sandwiched form
    ``Tr(P rho P)`` is returned; it equals ``Tr(P rho)`` for a projector.
    """
    _order(t0, t)
    if H is None:
        pt = np.asarray(P, dtype=complex)
    else:
        pt = _heisenberg(P, H, t, t0)
    return float(np.trace(pt @ rho.matrix @ pt).real)


@dataclass(frozen=True)
class EffectiveDensity:
    rho: DensityOperator
    branch_probability: float

    @property
    def normalization(self) -> float:
        """``N = 1 / Tr(P rho P)``."""
        return 1.0 / self.branch_probability


def _project(rho_m: np.ndarray, pt: np.ndarray):
    m = pt @ rho_m @ pt
    p = float(np.trace(m).real)
    if p < ZERO_BRANCH:
        raise ZeroBranch(f"branch probability {p:.3e} below {ZERO_BRANCH}")
    m = m / p
    return 0.5 * (m + m.conj().T), p


def effective_density(rho: DensityOperator, P, t: float, t0: float = 0.0,
                      H: Hamiltonian | None = None) -> EffectiveDensity:
    """Renormalised state after the registration of ``P`` at ``t``."""
    _order(t0, t)
    pt = np.asarray(P, dtype=complex) if H is None else _heisenberg(P, H, t, t0)
    m, p = _project(rho.matrix, pt)
    return EffectiveDensity(DensityOperator(m), p)


@dataclass(frozen=True)
class ChainProbability:
    direct: float
    recursive: float
    conditionals: tuple[float, ...]

    @property
    def residual(self) -> float:
        return abs(self.direct - self.recursive)

    @property
    def value(self) -> float:
        return self.direct


def _chain_projectors(H: Hamiltonian, chain: HistoryChain) -> list[np.ndarray]:
    """Heisenberg projectors of the chain, each stepped forward from ``t0``."""
    out = []
    for k in range(len(chain.steps)):
        p = chain.projector(k)
        # advance through the intermediate registration times, one step each
        t_prev = chain.base_time
        for s in chain.steps[: k + 1]:
            p = evolve_projector(p, H, t_prev, s.time)
            t_prev = s.time
        out.append(p)
    return out


def chain_probabilities(rho: DensityOperator, H: Hamiltonian,
                        chain: HistoryChain) -> ChainProbability:
    """Direct and recursive chain probabilities (see module docstring)."""
    if chain.families and (rho.dim != chain.families[0].dim or H.dim != rho.dim):
        raise InvalidParameter("dimension mismatch between state, Hamiltonian and chain")
    if not chain.steps:
        return ChainProbability(1.0, 1.0, ())
    projectors = _chain_projectors(H, chain)

    c = np.eye(rho.dim, dtype=complex)
    for p in projectors:
        c = p @ c
    direct = float(np.trace(c @ rho.matrix @ c.conj().T).real)

    current = rho.matrix
    conditionals = []
    for p in projectors:
        current, cond = _project(current, p)
        conditionals.append(cond)
    recursive = float(np.prod(conditionals))
    return ChainProbability(direct, recursive, tuple(conditionals))


def chain_probability(rho: DensityOperator, H: Hamiltonian, chain: HistoryChain) -> float:
    return chain_probabilities(rho, H, chain).value


def exhaustive_scan(rho: DensityOperator, H: Hamiltonian, chain: HistoryChain,
                    family: int | ProjectorFamily, t: float) -> dict[int, float]:
    """Probabilities of extending ``chain`` by each alternative of ``family`` at ``t``.

    The table sums to the probability of ``chain`` itself.  Extensions with
    a vanishing intermediate branch are reported as exactly 0.
    """
    if isinstance(family, ProjectorFamily):
        chain = HistoryChain(chain.families + (family,), chain.steps, chain.base_time)
        family = len(chain.families) - 1
    _order(chain.final_time, t, "extension time")
    table = {}
    for alpha in range(len(chain.families[family])):
        ext = chain.extended(family, alpha, t)
        try:
            table[alpha] = chain_probabilities(rho, H, ext).direct
        except ZeroBranch:
            table[alpha] = 0.0
    return table
