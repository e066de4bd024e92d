"""Per-state exponential workloads, their MGFs, and the stability check."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations
from math import fsum

import numpy as np

from .chain import ModulatingChain, stationary_distribution

MAX_SERVERS_MAX_EXP = 20
POLE_GUARD = 1e-9


class Discipline(str, enum.Enum):
    WORK_CONSERVING = "work-conserving"
    BLOCKING = "blocking"

    @classmethod
    def parse(cls, text: str) -> "Discipline":
        key = text.strip().lower().replace("_", "-")
        aliases = {"workconserving": cls.WORK_CONSERVING, "nonblocking": cls.WORK_CONSERVING,
                   "non-blocking": cls.WORK_CONSERVING}
        if key in aliases:
            return aliases[key]
        return cls(key)


class DomainError(ValueError):
    """Transform variable outside the effective domain of an MGF."""


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WorkloadSpec:
    """Arrival rates per state and an ``N x |E|`` matrix of service rates."""

    arrival_rates: np.ndarray
    service_rates: np.ndarray
    discipline: Discipline = Discipline.WORK_CONSERVING

    def __post_init__(self):
        lam = np.array(self.arrival_rates, dtype=float)
        mu = np.array(self.service_rates, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        if lam.ndim != 1 or mu.ndim != 2:
            raise WorkloadError("arrival_rates must be a vector and service_rates a matrix")
        if mu.shape[1] != lam.shape[0]:
            raise WorkloadError(
                f"service_rates has {mu.shape[1]} state columns but arrival_rates has {lam.shape[0]} states")
        if mu.shape[0] < 1:
            raise WorkloadError("need at least one server")
        for name, a in (("arrival_rates", lam), ("service_rates", mu)):
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise WorkloadError(f"{name} must be strictly positive and finite")
        lam.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "arrival_rates", lam)
        object.__setattr__(self, "service_rates", mu)
        if not isinstance(self.discipline, Discipline):
            object.__setattr__(self, "discipline", Discipline.parse(self.discipline))

    @property
    def num_servers(self) -> int:
        return self.service_rates.shape[0]

    @property
    def num_states(self) -> int:
        return self.arrival_rates.shape[0]

    def replace(self, **changes) -> "WorkloadSpec":
        kw = dict(arrival_rates=self.arrival_rates, service_rates=self.service_rates, discipline=self.discipline)
        kw.update(changes)
        return WorkloadSpec(**kw)

    def check_against(self, chain: ModulatingChain) -> None:
        if self.num_states != chain.num_states:
            raise WorkloadError(f"workload has {self.num_states} states, chain has {chain.num_states}")


@dataclass(frozen=True)
class MgfFactor:
    """A scalar MGF with finite effective domain ``[0, pole)``.

    ``pole`` is ``inf`` for factors that stay finite for all ``s >= 0``
    (e.g. ``E[exp(-s A)]``).
    """

    func: object
    pole: float

    def __call__(self, s: float) -> float:
        if s < 0:
            raise DomainError(f"s = {s} is negative")
        if s > self.pole * (1.0 - POLE_GUARD):
            raise DomainError(f"s = {s} is at or beyond the pole {self.pole}")
        return self.func(s)


def exp_service_mgf(rate: float) -> MgfFactor:
    """``E[exp(s S)]`` for ``S ~ Exp(rate)``."""
    return MgfFactor(lambda s: rate / (rate - s), float(rate))


def exp_interarrival_mgf(rate: float) -> MgfFactor:
    """``E[exp(-s A)]`` for ``A ~ Exp(rate)``."""
    return MgfFactor(lambda s: rate / (rate + s), float("inf"))


def _subset_sums(rates) -> tuple[np.ndarray, np.ndarray]:
    mu = np.asarray(rates, dtype=float)
    if mu.ndim != 1 or mu.size == 0:
        raise ValueError("rates must be a non-empty vector")
    if mu.size > MAX_SERVERS_MAX_EXP:
        raise ValueError(f"inclusion-exclusion limited to {MAX_SERVERS_MAX_EXP} rates, got {mu.size}")
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise ValueError("rates must be strictly positive and finite")
    n = mu.size
    # enumerate nonempty subsets via bitmasks
    masks = np.arange(1, 1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    sums = bits.astype(float) @ mu
    signs = np.where(bits.sum(axis=1) % 2 == 1, 1.0, -1.0)
    return sums, signs


def alpha_max_exp_mean(rates) -> float:
    """Mean of the maximum of independent exponentials with the given rates.

    Inclusion-exclusion over nonempty subsets ``S``:
    ``sum (-1)^(|S|+1) / sum_{i in S} rate_i``.
    """
    sums, signs = _subset_sums(rates)
    return fsum(signs / sums)


def beta_max_exp_mgf(rates, s: float) -> float:
    """MGF at ``s`` of the maximum of independent exponentials.

    Valid for ``0 <= s < min(rates)``; evaluation closer to the pole than
    ``1e-9 * min(rates)`` is rejected.
    """
    sums, signs = _subset_sums(rates)
    pole = float(sums.min())
    if s < 0:
        raise DomainError(f"s = {s} is negative")
    if s > pole * (1.0 - POLE_GUARD):
        raise DomainError(f"s = {s} is at or beyond the pole {pole}")
    return fsum(signs * sums / (sums - s))


def max_exp_mgf(rates) -> MgfFactor:
    """``E[exp(s max_n S_n)]`` as an :class:`MgfFactor` with precomputed subsets."""
    sums, signs = _subset_sums(rates)
    return MgfFactor(lambda s: fsum(signs * sums / (sums - s)), float(sums.min()))


def _alpha_by_combinations(rates) -> float:
    # reference implementation kept for tests of the bitmask enumeration
    mu = list(rates)
    terms = []
    for k in range(1, len(mu) + 1):
        for sub in combinations(mu, k):
            terms.append((-1) ** (k + 1) / sum(sub))
    return fsum(terms)


@dataclass(frozen=True)
class StabilityReport:
    server_drifts: np.ndarray  # E[S_n - A] per server under pi
    blocking_drift: float      # E[max_n S_n - A] under pi
    work_conserving_stable: bool
    blocking_stable: bool

    def stable_for(self, discipline: Discipline) -> bool:
        if Discipline(discipline) is Discipline.BLOCKING:
            return self.blocking_stable
        return self.work_conserving_stable

    def describe(self) -> str:
        drifts = ", ".join(f"{d:.6g}" for d in self.server_drifts)
        return f"server drifts [{drifts}], blocking drift {self.blocking_drift:.6g}"


def stability_check(chain: ModulatingChain, spec: WorkloadSpec) -> StabilityReport:
    spec.check_against(chain)
    pi = stationary_distribution(chain)
    inv_lam = 1.0 / spec.arrival_rates
    server = (1.0 / spec.service_rates - inv_lam[None, :]) @ pi
    if spec.num_servers <= MAX_SERVERS_MAX_EXP:
        alphas = np.array([alpha_max_exp_mean(spec.service_rates[:, j]) for j in range(spec.num_states)])
        blocking = float(pi @ (alphas - inv_lam))
    else:
        blocking = float("nan")
    return StabilityReport(
        server_drifts=server,
        blocking_drift=blocking,
        work_conserving_stable=bool(np.max(server) < 0),
        blocking_stable=bool(blocking < 0),
    )
