"""Fit a Markov-modulated Poisson arrival model to per-slot arrival counts.

The counts are modelled as a hidden Markov chain over slots with Poisson
emissions; the slot-level means divided by the slot length give per-second
intensities.  Parameters are estimated by Baum-Welch EM with random restarts
and the number of states is chosen by BIC.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from math import lgamma
from pathlib import Path

import numpy as np
from numba import njit

from .chain import ModulatingChain, stationary_distribution

log = logging.getLogger(__name__)

MAX_STATES = 8
LL_TOL = 1e-7
MAX_EM_ITER = 500
RESTARTS = 10
MIN_MEAN = 1e-10


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True)
class TraceCounts:
    counts: np.ndarray
    slot_seconds: float = 300.0
    discard_prefix: int = 0

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise CalibrationError("counts must be a vector of nonnegative integers")
        object.__setattr__(self, "counts", c.astype(np.int64))
        if not self.slot_seconds > 0:
            raise CalibrationError("slot_seconds must be positive")
        if self.discard_prefix < 0:
            raise CalibrationError("discard_prefix must be nonnegative")
        if self.used.size == 0:
            raise CalibrationError("no counts left after discarding the prefix")

    @property
    def used(self) -> np.ndarray:
        return self.counts[self.discard_prefix:]


def read_trace(path, slot_seconds: float = 300.0, discard_prefix: int = 0) -> TraceCounts:
    """One count per line (first CSV column); a non-numeric first line is a header."""
    values = []
    with open(Path(path), newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            cell = row[0].strip()
            try:
                v = float(cell)
            except ValueError:
                if lineno == 0 and not values:
                    continue
                raise CalibrationError(f"line {lineno + 1}: cannot parse count {cell!r}") from None
            values.append(v)
    return TraceCounts(np.array(values), slot_seconds, discard_prefix)


@njit(cache=False)
def _forward_backward(x_logp, trans, init):
    T, k = x_logp.shape
    alpha = np.empty((T, k))
    scale = np.empty(T)
    shift = np.empty(T)
    b = np.empty((T, k))
    for t in range(T):
        m = x_logp[t, 0]
        for j in range(1, k):
            if x_logp[t, j] > m:
                m = x_logp[t, j]
        shift[t] = m
        for j in range(k):
            b[t, j] = np.exp(x_logp[t, j] - m)
    for j in range(k):
        alpha[0, j] = init[j] * b[0, j]
    c = alpha[0].sum()
    scale[0] = c
    alpha[0] /= c
    for t in range(1, T):
        for j in range(k):
            acc = 0.0
            for i in range(k):
                acc += alpha[t - 1, i] * trans[i, j]
            alpha[t, j] = acc * b[t, j]
        c = alpha[t].sum()
        scale[t] = c
        alpha[t] /= c
    beta = np.empty((T, k))
    beta[T - 1, :] = 1.0
    for t in range(T - 2, -1, -1):
        for i in range(k):
            acc = 0.0
            for j in range(k):
                acc += trans[i, j] * b[t + 1, j] * beta[t + 1, j]
            beta[t, i] = acc / scale[t + 1]
    gamma = alpha * beta
    for t in range(T):
        gamma[t] /= gamma[t].sum()
    xi = np.zeros((k, k))
    for t in range(T - 1):
        for i in range(k):
            for j in range(k):
                xi[i, j] += alpha[t, i] * trans[i, j] * b[t + 1, j] * beta[t + 1, j] / scale[t + 1]
    loglik = np.log(scale).sum() + shift.sum()
    return loglik, gamma, xi


def _poisson_logp(x: np.ndarray, means: np.ndarray, log_fact: np.ndarray) -> np.ndarray:
    m = np.maximum(means, MIN_MEAN)
    return x[:, None] * np.log(m)[None, :] - m[None, :] - log_fact[:, None]


@dataclass
class EmResult:
    means: np.ndarray        # slot-level Poisson means
    transition: np.ndarray
    initial: np.ndarray
    log_likelihood: float
    history: list = field(default_factory=list)
    converged: bool = False


def em_poisson_hmm(counts, means, transition, initial, tol: float = LL_TOL,
                   max_iter: int = MAX_EM_ITER) -> EmResult:
    """Baum-Welch from the given starting point; ``history`` holds the log-likelihood per E-step."""
    x = np.asarray(counts, dtype=float)
    log_fact = np.array([lgamma(v + 1.0) for v in x])
    means = np.array(means, dtype=float)
    trans = np.array(transition, dtype=float)
    init = np.array(initial, dtype=float)
    history = []
    converged = False
    for _ in range(max_iter):
        ll, gamma, xi = _forward_backward(_poisson_logp(x, means, log_fact), trans, init)
        history.append(float(ll))
        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break
        init = gamma[0]
        rows = xi.sum(axis=1, keepdims=True)
        trans = np.where(rows > 0, xi / np.where(rows > 0, rows, 1.0), 1.0 / len(means))
        weight = gamma.sum(axis=0)
        means = np.where(weight > 0, gamma.T @ x / np.where(weight > 0, weight, 1.0), MIN_MEAN)
    return EmResult(means, trans, init, history[-1], history, converged)


def _relabel_descending(res: EmResult) -> EmResult:
    order = np.argsort(-res.means, kind="stable")
    return EmResult(res.means[order], res.transition[np.ix_(order, order)], res.initial[order],
                    res.log_likelihood, res.history, res.converged)


def _initial_guess(x: np.ndarray, k: int, rng: np.random.Generator):
    qs = (np.arange(k) + 0.5) / k
    means = np.quantile(x, qs) * rng.uniform(0.9, 1.1, size=k) + rng.uniform(0, 0.5, size=k)
    trans = rng.dirichlet(np.ones(k), size=k)
    return np.maximum(means, 1e-3), trans, np.full(k, 1.0 / k)


def num_parameters(k: int) -> int:
    return k * k + k - 1


def bic(log_likelihood: float, k: int, n_obs: int) -> float:
    return -2.0 * log_likelihood + num_parameters(k) * np.log(n_obs)


def fit_fixed_states(counts, k: int, rng: np.random.Generator, restarts: int = RESTARTS) -> EmResult:
    """Best of ``restarts`` EM runs with ``k`` states, relabelled by descending mean."""
    x = np.asarray(counts, dtype=float)
    if k == 1:
        m = np.array([x.mean()])
        ll = float(np.sum(_poisson_logp(x, m, np.array([lgamma(v + 1.0) for v in x]))))
        return EmResult(m, np.ones((1, 1)), np.ones(1), ll, [ll], True)
    best = None
    for _ in range(restarts):
        res = em_poisson_hmm(x, *_initial_guess(x, k, rng))
        if best is None or res.log_likelihood > best.log_likelihood:
            best = res
    if not best.converged:
        log.warning("EM with %d states hit the iteration cap", k)
    return _relabel_descending(best)


@dataclass(frozen=True)
class FittedMmpp:
    num_states: int
    per_second_intensities: np.ndarray
    transition: np.ndarray
    log_likelihood: float
    information_criterion: float
    slot_seconds: float
    initial: np.ndarray | None = None
    degenerate: bool = False
    candidates: tuple = ()  # (k, log-likelihood, BIC) for every k tried

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "per_second_intensities": self.per_second_intensities.tolist(),
            "transition": self.transition.tolist(),
            "log_likelihood": self.log_likelihood,
            "bic": self.information_criterion,
            "slot_seconds": self.slot_seconds,
            "degenerate": self.degenerate,
            "candidates": [{"states": k, "log_likelihood": ll, "bic": b} for k, ll, b in self.candidates],
        }


def fit_mmpp(trace: TraceCounts, max_states: int = 4, seed: int = 0, restarts: int = RESTARTS) -> FittedMmpp:
    """Select the number of states by BIC (ties go to fewer states) and fit it."""
    if not 1 <= max_states <= MAX_STATES:
        raise CalibrationError(f"max_states must be in 1..{MAX_STATES}")
    x = trace.used
    if x.size < 10 * max_states:
        raise CalibrationError(f"need at least {10 * max_states} slots for up to {max_states} states, got {x.size}")
    rng = np.random.default_rng(seed)
    degenerate = bool(np.all(x == x[0]))
    ks = [1] if degenerate else list(range(1, max_states + 1))
    fits, candidates = {}, []
    for k in ks:
        res = fit_fixed_states(x, k, rng, restarts)
        score = bic(res.log_likelihood, k, x.size)
        fits[k] = (res, score)
        candidates.append((k, res.log_likelihood, float(score)))
    k_best = min(fits, key=lambda k: (fits[k][1], k))
    res, score = fits[k_best]
    return FittedMmpp(
        num_states=k_best,
        per_second_intensities=res.means / trace.slot_seconds,
        transition=res.transition,
        log_likelihood=res.log_likelihood,
        information_criterion=float(score),
        slot_seconds=trace.slot_seconds,
        initial=res.initial,
        degenerate=degenerate,
        candidates=tuple(candidates),
    )


def generate_mmpp_counts(intensities, transition, num_slots: int, seed: int, slot_seconds: float = 300.0,
                         initial=None) -> TraceCounts:
    """Slot-level chain with Poisson(intensity * slot_seconds) counts.

    The chain starts from ``initial``, or from its stationary law if omitted.
    """
    lam = np.asarray(intensities, dtype=float)
    chain = ModulatingChain(transition, initial).check()
    if lam.shape != (chain.num_states,) or np.any(lam <= 0):
        raise CalibrationError("intensities must be positive, one per state")
    rng = np.random.default_rng(seed)
    p0 = stationary_distribution(chain) if initial is None else chain.initial
    cum = np.cumsum(chain.transition, axis=1)
    state = int(min(np.searchsorted(np.cumsum(p0), rng.random(), side="right"), chain.num_states - 1))
    states = np.empty(num_slots, dtype=np.int64)
    u = rng.random(num_slots)
    for t in range(num_slots):
        states[t] = state
        state = int(min(np.searchsorted(cum[state], u[t], side="right"), chain.num_states - 1))
    counts = rng.poisson(lam[states] * slot_seconds)
    return TraceCounts(counts, slot_seconds, 0)
