"""Dense joint probability tables over subsets of binary variables.

A table stores one probability per state of its scope.  States are
indexed with the last scope variable as the least significant bit, so
index 0 is the all-false state and the highest index the all-true state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import (ConditionalConstraint, Constraint, ConstraintSet, Literal,
                    MarginalConstraint, NeighborGraph)

SCOPE_CAP = 20          # 2^20 states; guards accidental state-space explosion
PROB_FLOOR = 1e-12      # conditioning events below this are treated as empty
DEFAULT_CHECK_TOL = 1e-6


@dataclass(frozen=True)
class JointTable:
    scope: tuple[str, ...]
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        scope = tuple(self.scope)
        if not scope:
            raise ValueError("empty scope")
        if len(set(scope)) != len(scope):
            raise ValueError(f"scope has repeated variables: {scope}")
        if len(scope) > SCOPE_CAP:
            raise ValueError(f"scope of {len(scope)} variables exceeds cap {SCOPE_CAP}")
        probs = np.array(self.probs, dtype=float)  # own copy; frozen below
        if probs.shape != (1 << len(scope),):
            raise ValueError(f"expected {1 << len(scope)} probabilities, got {probs.shape}")
        if probs.min() < -1e-12:
            raise ValueError(f"negative probability {probs.min()}")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")
        probs = np.maximum(probs, 0.0)
        probs.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return self.probs.size

    def index(self, name: str) -> int:
        try:
            return self.scope.index(name)
        except ValueError:
            raise ValueError(f"variable {name!r} not in scope {self.scope}") from None


def uniform(scope: Sequence[str]) -> JointTable:
    scope = tuple(scope)
    if not 1 <= len(scope) <= SCOPE_CAP:
        raise ValueError(f"scope size {len(scope)} outside [1, {SCOPE_CAP}]")
    n = 1 << len(scope)
    return JointTable(scope, np.full(n, 1.0 / n))


def var_mask(scope: Sequence[str], name: str, positive: bool = True) -> np.ndarray:
    """Boolean mask over states where `name` takes the given polarity."""
    scope = tuple(scope)
    pos = scope.index(name)
    shift = len(scope) - 1 - pos
    bits = (np.arange(1 << len(scope)) >> shift) & 1
    return (bits == 1) if positive else (bits == 0)


def event_mask(scope: Sequence[str], literals: Iterable[Literal]) -> np.ndarray:
    """Mask over states satisfying every literal.  Contradictory literals
    yield the empty event."""
    scope = tuple(scope)
    mask = np.ones(1 << len(scope), dtype=bool)
    for lit in literals:
        if lit.name not in scope:
            raise ValueError(f"variable {lit.name!r} not in scope {scope}")
        mask &= var_mask(scope, lit.name, lit.positive)
    return mask


def probability(table: JointTable, literals: Iterable[Literal]) -> float:
    return float(table.probs[event_mask(table.scope, literals)].sum())


def marginalize(table: JointTable, subscope: Sequence[str]) -> JointTable:
    """Sum the table down to `subscope`, in the order given."""
    subscope = tuple(subscope)
    if not subscope:
        raise ValueError("empty subscope")
    k = len(table.scope)
    idx = np.arange(table.size)
    sub = np.zeros(table.size, dtype=np.int64)
    for name in subscope:
        pos = table.index(name)
        sub = (sub << 1) | ((idx >> (k - 1 - pos)) & 1)
    out = np.bincount(sub, weights=table.probs, minlength=1 << len(subscope))
    return JointTable(subscope, out)


def conditional(table: JointTable, target: Literal, given: Sequence[Literal] = ()) -> float:
    """P(target | given) read off the table."""
    given_mask = event_mask(table.scope, given)
    denom = float(table.probs[given_mask].sum())
    if denom < PROB_FLOOR:
        raise ValueError(f"conditioning event has probability {denom}; conditional undefined")
    num_mask = given_mask & event_mask(table.scope, [target])
    return float(table.probs[num_mask].sum()) / denom


@dataclass(frozen=True)
class ResidualEntry:
    constraint: Constraint
    current: float | None   # None when the conditioning event has ~zero mass
    target: float
    residual: float | None  # current - target, signed

    @property
    def magnitude(self) -> float:
        # undefined conditionals count as maximally violated for scheduling
        return 1.0 if self.residual is None else abs(self.residual)


@dataclass(frozen=True)
class ResidualReport:
    entries: tuple[ResidualEntry, ...]
    universal: float  # sum of all state probabilities minus 1

    @property
    def max_magnitude(self) -> float:
        mags = [e.magnitude for e in self.entries]
        mags.append(abs(self.universal))
        return max(mags)

    def magnitudes(self) -> tuple[float, ...]:
        return tuple(e.magnitude for e in self.entries)


def constraint_current(table: JointTable, c: Constraint) -> float | None:
    """Current table value of the constrained quantity, or None if the
    conditioning event has negligible mass."""
    if isinstance(c, ConditionalConstraint):
        try:
            return conditional(table, c.target, c.condition)
        except ValueError:
            return None
    return probability(table, c.literals)


def residuals(table: JointTable, cs: ConstraintSet) -> ResidualReport:
    entries = []
    for c in cs:
        cur = constraint_current(table, c)
        resid = None if cur is None else cur - c.value
        entries.append(ResidualEntry(c, cur, c.value, resid))
    return ResidualReport(tuple(entries), float(table.probs.sum()) - 1.0)


def check_ci(table: JointTable, x: str, y: str, given: Iterable[str] = (),
             tol: float = DEFAULT_CHECK_TOL) -> bool:
    """Numerical conditional-independence test: x independent of y given
    each assignment of `given` that carries more than `tol` mass."""
    given = tuple(given)
    if x == y or x in given or y in given:
        raise ValueError("x, y, and the conditioning set must be disjoint")
    axes = (given + (x, y))
    for name in axes:
        table.index(name)
    arr = marginalize(table, axes).probs.reshape((2,) * len(axes))
    flat = arr.reshape(-1, 2, 2)
    for block in flat:
        mass = block.sum()
        if mass <= tol:
            continue
        pxy = block[1, 1] / mass
        px = block[1, :].sum() / mass
        py = block[:, 1].sum() / mass
        if abs(pxy - px * py) > tol:
            return False
    return True


def check_mrf(table: JointTable, ng: NeighborGraph, tol: float = DEFAULT_CHECK_TOL) -> bool:
    """Check the Markov property: each variable's conditional given all
    others equals its conditional given its neighbors alone, at every
    full assignment of positive probability."""
    scope = table.scope
    if set(scope) != set(ng.nodes):
        raise ValueError("table scope must cover exactly the graph nodes")
    arr = table.probs.reshape((2,) * len(scope))
    for i, x in enumerate(scope):
        nbrs = ng.neighbors(x)
        p = np.moveaxis(arr, i, -1)  # axes: scope minus x (order kept), then x
        rest = [n for n in scope if n != x]
        tot = p.sum(axis=-1)
        q = p
        for j, name in enumerate(rest):
            if name not in nbrs:
                q = q.sum(axis=j, keepdims=True)
        qtot = q.sum(axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            full_cond = np.where(tot > PROB_FLOOR, p[..., 1] / np.maximum(tot, PROB_FLOOR), 0.0)
            nbr_cond = np.where(qtot > PROB_FLOOR, q[..., 1] / np.maximum(qtot, PROB_FLOOR), 0.0)
        diff = np.abs(full_cond - nbr_cond)
        if diff[tot > PROB_FLOOR].size and diff[tot > PROB_FLOOR].max() > tol:
            return False
    return True


def serialize_table(table: JointTable) -> str:
    """One `<bits> <probability>` line per state after a scope header."""
    k = len(table.scope)
    lines = ["scope " + " ".join(table.scope)]
    for s in range(table.size):
        lines.append(f"{s:0{k}b} {table.probs[s]:.6f}")
    return "\n".join(lines) + "\n"
