"""Exponential tail and mean bounds on fork-join waiting times.

For each transformed kernel the decay rate is the largest ``s`` with
spectral radius ``chi(s) <= 1``; the prefactor is ``max_c 1 / r(c)`` for the
Perron right eigenvector ``r`` normalized to unit mean under the law of
``C_0``.  Work-conserving systems add one such term per server, blocking
systems have a single term.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from .chain import ModulatingChain
from .kernel import TransformedKernel, build_blocking_kernel, build_server_kernel
from .spectral import normalize_eigenvector, perron_eigenpair
from .workload import Discipline, WorkloadSpec, stability_check

log = logging.getLogger(__name__)

BISECTION_TOL = 1e-10
BOUNDARY_CLIP = 1e-9
PROBE_FRACTION = 1e-6


class UnstableSystemError(ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DecayRateError(RuntimeError):
    pass


def spectral_radius(kernel: TransformedKernel, s: float) -> float:
    return perron_eigenpair(kernel.evaluate(s))[0]


def decay_rate(kernel: TransformedKernel, tol: float = BISECTION_TOL) -> tuple[float, bool]:
    """Return ``(theta, hit_boundary)`` with ``theta = sup{s > 0 : chi(s) <= 1}``.

    ``chi(0) = 1`` and ``log chi`` is convex, so under negative drift
    ``{chi <= 1}`` is an interval starting at 0 and bisection finds its right
    end.  If ``chi`` stays below 1 up to the MGF pole, the clipped pole is
    returned with ``hit_boundary=True``.
    """
    dmax = kernel.domain_max
    lo = PROBE_FRACTION * dmax
    if spectral_radius(kernel, lo) > 1.0:
        raise DecayRateError(
            f"spectral radius exceeds 1 at s = {lo:.3g}; drift is not negative (unstable or inconsistent input)")
    hi = dmax * (1.0 - BOUNDARY_CLIP)
    if spectral_radius(kernel, hi) <= 1.0:
        return hi, True
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if spectral_radius(kernel, mid) <= 1.0:
            lo = mid
        else:
            hi = mid
    return lo, False


@dataclass(frozen=True)
class BoundTerm:
    decay_rate: float
    prefactor: float
    hit_boundary: bool
    eigenvector: np.ndarray  # normalized to unit mean under the law of C_0
    spectral_radius: float   # chi at the decay rate


@dataclass(frozen=True)
class BoundReport:
    discipline: Discipline
    terms: tuple[BoundTerm, ...]  # one per server, or a single term for blocking

    @property
    def decay_rates(self) -> np.ndarray:
        return np.array([t.decay_rate for t in self.terms])

    @property
    def prefactors(self) -> np.ndarray:
        return np.array([t.prefactor for t in self.terms])

    @property
    def boundary_flags(self) -> list[bool]:
        return [t.hit_boundary for t in self.terms]

    @property
    def mean_bound(self) -> float:
        return float(np.sum(self.prefactors / self.decay_rates))

    def tail_bound(self, w):
        """``min(1, sum phi exp(-theta w))``; accepts scalars or arrays."""
        w_arr = np.asarray(w, dtype=float)
        vals = np.exp(-np.multiply.outer(w_arr, self.decay_rates)) @ self.prefactors
        out = np.minimum(1.0, vals)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {
            "discipline": self.discipline.value,
            "decay_rates": self.decay_rates.tolist(),
            "prefactors": self.prefactors.tolist(),
            "boundary_flags": self.boundary_flags,
            "mean_bound": self.mean_bound,
        }

    def grid_csv(self, grid) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["w", "bound"])
        for w, b in zip(grid, self.tail_bound(np.asarray(grid, dtype=float))):
            writer.writerow([repr(float(w)), repr(float(b))])
        return buf.getvalue()


def bound_term(kernel: TransformedKernel, initial: np.ndarray) -> BoundTerm:
    theta, boundary = decay_rate(kernel)
    if boundary:
        log.warning("decay rate of %s kernel hit the MGF pole %.6g", kernel.kind, kernel.domain_max)
    chi, r = perron_eigenpair(kernel.evaluate(theta))
    r = normalize_eigenvector(r, initial)
    return BoundTerm(theta, float(np.max(1.0 / r)), boundary, r, chi)


def _require_stable(chain, spec, discipline):
    report = stability_check(chain, spec)
    if not report.stable_for(discipline):
        raise UnstableSystemError(f"{discipline.value} system is unstable: {report.describe()}", report)
    return report


def work_conserving_bound(chain: ModulatingChain, spec: WorkloadSpec) -> BoundReport:
    _require_stable(chain, spec, Discipline.WORK_CONSERVING)
    initial = chain.initial_distribution
    terms = tuple(bound_term(build_server_kernel(chain, spec, n), initial) for n in range(spec.num_servers))
    return BoundReport(Discipline.WORK_CONSERVING, terms)


def blocking_bound(chain: ModulatingChain, spec: WorkloadSpec) -> BoundReport:
    _require_stable(chain, spec, Discipline.BLOCKING)
    term = bound_term(build_blocking_kernel(chain, spec), chain.initial_distribution)
    return BoundReport(Discipline.BLOCKING, (term,))


def compute_bound(chain: ModulatingChain, spec: WorkloadSpec) -> BoundReport:
    """Dispatch on ``spec.discipline``."""
    if spec.discipline is Discipline.BLOCKING:
        return blocking_bound(chain, spec)
    return work_conserving_bound(chain, spec)
