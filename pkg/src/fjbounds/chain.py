"""Finite modulating Markov chain: validation and stationary distribution."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.sparse.csgraph import breadth_first_order, connected_components

STOCHASTIC_TOL = 1e-12
STRUCTURAL_ZERO = 1e-15
STATIONARY_TOL = 1e-10
MAX_STATES = 512


class ChainError(ValueError):
    """Raised when a chain violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{v.kind}: {v.message}" for v in self.violations))


class StationaryError(RuntimeError):
    pass


@dataclass(frozen=True)
class Violation:
    kind: str  # dimension | stochastic | initial | reducible | periodic
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModulatingChain:
    """Transition matrix and law of the initial state ``C_0``.

    No validation happens at construction; call :func:`validate_chain` or
    :meth:`check`.  ``initial=None`` means "use the stationary distribution".
    """

    transition: np.ndarray
    initial: np.ndarray | None = None
    _stationary: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        if self.initial is None:
            object.__setattr__(self, "initial", None)
        else:
            object.__setattr__(self, "initial", _frozen(self.initial))

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def initial_distribution(self) -> np.ndarray:
        if self.initial is None:
            return stationary_distribution(self)
        return self.initial

    def check(self) -> "ModulatingChain":
        result = validate_chain(self)
        if not result.ok:
            raise ChainError(result.violations)
        return self

    def with_initial(self, initial) -> "ModulatingChain":
        return ModulatingChain(self.transition, initial)


def _period(adj: np.ndarray) -> int:
    """Period of an irreducible digraph via BFS levels from state 0."""
    order, pred = breadth_first_order(adj, 0, directed=True, return_predecessors=True)
    level = np.full(adj.shape[0], -1, dtype=int)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    g = 0
    for u, v in zip(*np.nonzero(adj)):
        g = gcd(g, int(level[u] + 1 - level[v]))
    return abs(g)


def validate_chain(chain: ModulatingChain) -> ValidationResult:
    """Check shape, stochasticity, irreducibility and aperiodicity.

    Graph checks are skipped if the matrix is not even square.
    """
    T = chain.transition
    out: list[Violation] = []
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] == 0:
        out.append(Violation("dimension", f"transition must be a non-empty square matrix, got shape {T.shape}"))
        return ValidationResult(tuple(out))
    k = T.shape[0]
    if k > MAX_STATES:
        out.append(Violation("dimension", f"at most {MAX_STATES} states supported, got {k}"))
        return ValidationResult(tuple(out))
    if chain.initial is not None and chain.initial.shape != (k,):
        out.append(Violation("dimension", f"initial has shape {chain.initial.shape}, expected ({k},)"))

    if not np.all(np.isfinite(T)) or np.any(T < 0) or np.any(T > 1):
        out.append(Violation("stochastic", "transition entries must lie in [0, 1]"))
    bad_rows = np.nonzero(np.abs(T.sum(axis=1) - 1.0) > STOCHASTIC_TOL)[0]
    if bad_rows.size:
        out.append(Violation("stochastic", f"rows {bad_rows.tolist()} do not sum to 1"))
    if chain.initial is not None and chain.initial.shape == (k,):
        p = chain.initial
        if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > STOCHASTIC_TOL:
            out.append(Violation("initial", "initial must be a probability vector"))

    adj = (T > STRUCTURAL_ZERO).astype(np.int8)
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    if ncomp > 1:
        out.append(Violation("reducible", f"chain has {ncomp} strongly connected components"))
    else:
        d = _period(adj)
        if d != 1:
            out.append(Violation("periodic", f"chain has period {d}"))
    return ValidationResult(tuple(out))


def _power_stationary(T: np.ndarray, max_iter: int = 200_000) -> np.ndarray:
    # lazy chain (I + T)/2 shares pi and is aperiodic
    P = 0.5 * (np.eye(T.shape[0]) + T)
    pi = np.full(T.shape[0], 1.0 / T.shape[0])
    for _ in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < 1e-15:
            return nxt
        pi = nxt
    return pi


def stationary_distribution(chain: ModulatingChain) -> np.ndarray:
    """Solve ``pi T = pi``, ``sum(pi) = 1``; cached on the chain object."""
    if chain._stationary:
        return chain._stationary[0]
    T = chain.transition
    k = T.shape[0]
    A = np.vstack([np.eye(k) - T.T, np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    if not _stationary_ok(pi, T):
        pi = _power_stationary(T)
        if not _stationary_ok(pi, T):
            raise StationaryError("stationary distribution did not converge; chain is numerically degenerate")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    pi.setflags(write=False)
    chain._stationary.append(pi)
    return pi


def _stationary_ok(pi: np.ndarray, T: np.ndarray) -> bool:
    return (
        np.all(np.isfinite(pi))
        and pi.min() > 0
        and abs(pi.sum() - 1.0) < 1e-10
        and np.max(np.abs(pi @ T - pi)) <= STATIONARY_TOL
    )


def dirichlet_chain(num_states: int, rng: np.random.Generator, stickiness: float = 0.0) -> ModulatingChain:
    """Random chain with Dirichlet(1, ..., 1) rows, optionally mixed with the identity.

    ``stickiness`` in [0, 1) is the extra self-transition mass; it keeps every
    row strictly positive so the result is irreducible and aperiodic.
    """
    rows = rng.dirichlet(np.ones(num_states), size=num_states)
    T = (1.0 - stickiness) * rows + stickiness * np.eye(num_states)
    T /= T.sum(axis=1, keepdims=True)
    return ModulatingChain(T)
