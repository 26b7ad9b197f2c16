"""Constraint-consistency checking.

Globally: a constraint set is satisfiable iff there is a nonnegative,
normalized solution to its linear-equality encoding, decided here by
linear-programming feasibility with a null-space rank test as a fast
necessary filter.  Locally: on an acyclic clique decomposition it is
enough to check the first clique alone and every later clique against its
running-intersection anchor, which keeps each feasibility problem at
clique size instead of the full state space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from . import dist
from .dist import SCOPE_CAP, JointTable, event_mask
from .graphops import Decomposition, Hypergraph, graham_acyclic
from .model import (ConditionalConstraint, Constraint, ConstraintSet,
                    MarginalConstraint, Model)

FEASIBILITY_TOL = 1e-9
NULLSPACE_TOL = 1e-10


@dataclass(frozen=True)
class LinearRow:
    coeffs: np.ndarray
    rhs: float
    constraint: Constraint  # provenance


@dataclass(frozen=True)
class LinearSystem:
    """Homogeneous linear encoding of a constraint set over one scope.

    The universal row (all coefficients 1, right-hand side 1) is implied
    and kept out of `rows`.
    """

    scope: tuple[str, ...]
    rows: tuple[LinearRow, ...]

    @property
    def size(self) -> int:
        return 1 << len(self.scope)

    def matrix(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, self.size))
        return np.array([r.coeffs for r in self.rows])

    def universal_row(self) -> np.ndarray:
        return np.ones(self.size)


def to_linear(cs: ConstraintSet, scope: Sequence[str]) -> LinearSystem:
    """Encode every constraint whose variables fit in `scope`.

    Conditional P(x|E)=mu:  (1-mu)*sum(E&x) - mu*sum(E&~x) = 0.
    Marginal  P(E)=v:       sum(E) - v*sum(all) = 0.
    """
    scope = tuple(scope)
    scope_set = set(scope)
    n = 1 << len(scope)
    rows = []
    for c in cs:
        if not c.scope <= scope_set:
            continue
        if isinstance(c, ConditionalConstraint):
            cond = event_mask(scope, c.condition)
            tgt = event_mask(scope, [c.target])
            coeffs = np.zeros(n)
            coeffs[cond & tgt] = 1.0 - c.value
            coeffs[cond & ~tgt] = -c.value
        else:
            ev = event_mask(scope, c.literals)
            coeffs = np.full(n, -c.value)
            coeffs[ev] += 1.0
        rows.append(LinearRow(coeffs, 0.0, c))
    return LinearSystem(scope, tuple(rows))


@dataclass(frozen=True)
class SolutionSpace:
    scope: tuple[str, ...]
    basis: np.ndarray  # orthonormal columns spanning the homogeneous solutions

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    def contains(self, vector: np.ndarray, tol: float = 1e-9) -> bool:
        v = np.asarray(vector, dtype=float)
        resid = v - self.basis @ (self.basis.T @ v)
        return bool(np.abs(resid).max() <= tol * max(1.0, np.abs(v).max()))


def solution_space(ls: LinearSystem) -> SolutionSpace:
    m = ls.matrix()
    if m.shape[0] == 0:
        return SolutionSpace(ls.scope, np.eye(ls.size))
    basis = scipy.linalg.null_space(m, rcond=NULLSPACE_TOL)
    return SolutionSpace(ls.scope, basis)


def marginalization_matrix(scope: Sequence[str], subscope: Sequence[str]) -> np.ndarray:
    """0/1 matrix summing full states down to subscope states."""
    scope = tuple(scope)
    subscope = tuple(subscope)
    k = len(scope)
    idx = np.arange(1 << k)
    sub = np.zeros(1 << k, dtype=np.int64)
    for name in subscope:
        pos = scope.index(name)
        sub = (sub << 1) | ((idx >> (k - 1 - pos)) & 1)
    m = np.zeros((1 << len(subscope), 1 << k))
    m[sub, idx] = 1.0
    return m


def project_space(ss: SolutionSpace, subscope: Sequence[str]) -> SolutionSpace:
    """Image of the solution space under marginalization to subscope."""
    subscope = tuple(subscope)
    if not set(subscope) <= set(ss.scope):
        raise ValueError("subscope must be contained in the scope")
    m = marginalization_matrix(ss.scope, subscope)
    image = m @ ss.basis
    if image.size == 0:
        return SolutionSpace(subscope, np.zeros((1 << len(subscope), 0)))
    u, s, _ = np.linalg.svd(image, full_matrices=False)
    rank = int(np.sum(s > NULLSPACE_TOL * max(1.0, s[0] if s.size else 0.0)))
    return SolutionSpace(subscope, u[:, :rank])


def rank_nontrivial(ls: LinearSystem) -> bool:
    """The necessary condition: the homogeneous system admits a nonzero
    solution (otherwise no distribution can satisfy the constraints)."""
    return solution_space(ls).dimension > 0


def _solve_feasible(a_eq: np.ndarray, b_eq: np.ndarray, n: int) -> np.ndarray | None:
    """Nonnegative solution of a_eq x = b_eq, or None.

    Among feasible points, maximizes the smallest entry so witnesses stay
    interior whenever the constraints allow it (a pure vertex solution
    may park whole conditioning events at zero mass).
    """
    a_aug = np.hstack([a_eq, np.zeros((a_eq.shape[0], 1))])
    a_ub = np.hstack([-np.eye(n), np.ones((n, 1))])  # t <= x_j for all j
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = scipy.optimize.linprog(
        c=c, A_eq=a_aug, b_eq=b_eq, A_ub=a_ub, b_ub=np.zeros(n),
        bounds=[(0.0, None)] * n + [(0.0, 1.0)], method="highs")
    if res.status == 0:
        return np.maximum(res.x[:n], 0.0)
    if res.status == 2:
        return None
    raise RuntimeError(f"feasibility solve failed: {res.message}")


def nonneg_feasible(ls: LinearSystem) -> np.ndarray | None:
    """A probability vector satisfying all rows, or None.

    Phase-one style feasibility via linear programming.
    """
    a_eq = np.vstack([ls.matrix(), ls.universal_row()])
    b_eq = np.zeros(a_eq.shape[0])
    b_eq[-1] = 1.0
    p = _solve_feasible(a_eq, b_eq, ls.size)
    if p is None:
        return None
    return p / p.sum()


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    rank_ok: bool | None       # null-space pre-test (None when not run)
    feasible: bool | None      # LP feasibility (None when skipped)
    witnesses: tuple[tuple[frozenset[str], JointTable], ...]
    culprit: tuple[frozenset[str], frozenset[str]] | None = None
    note: str = ""

    @property
    def verdict(self) -> str:
        return "consistent" if self.consistent else "inconsistent"


def _clique_scope(model: Model, clique: frozenset[str]) -> tuple[str, ...]:
    return model.ordered_scope(clique)


def global_consistent(model: Model) -> ConsistencyReport:
    """Global check over the full state space: rank pre-test first,
    then nonnegative feasibility."""
    if len(model.variables) > SCOPE_CAP:
        raise ValueError(
            f"{len(model.variables)} variables exceed the global-check cap "
            f"{SCOPE_CAP}; use a decomposition and local_check")
    ls = to_linear(model.constraints, model.names)
    if not rank_nontrivial(ls):
        return ConsistencyReport(False, rank_ok=False, feasible=None, witnesses=())
    p = nonneg_feasible(ls)
    if p is None:
        return ConsistencyReport(False, rank_ok=True, feasible=False, witnesses=())
    scope = model.names
    witness = JointTable(scope, p)
    return ConsistencyReport(True, rank_ok=True, feasible=True,
                             witnesses=((frozenset(scope), witness),))


def _pairwise_lp(model: Model, clique_i: frozenset[str], clique_j: frozenset[str]
                 ) -> tuple[np.ndarray, np.ndarray] | None:
    scope_i = _clique_scope(model, clique_i)
    scope_j = _clique_scope(model, clique_j)
    ls_i = to_linear(model.constraints, scope_i)
    ls_j = to_linear(model.constraints, scope_j)
    ni, nj = ls_i.size, ls_j.size
    rows = []
    rhs = []
    for r in ls_i.rows:
        rows.append(np.concatenate([r.coeffs, np.zeros(nj)]))
        rhs.append(0.0)
    for r in ls_j.rows:
        rows.append(np.concatenate([np.zeros(ni), r.coeffs]))
        rhs.append(0.0)
    rows.append(np.concatenate([np.ones(ni), np.zeros(nj)]))
    rhs.append(1.0)
    rows.append(np.concatenate([np.zeros(ni), np.ones(nj)]))
    rhs.append(1.0)
    sep = model.ordered_scope(clique_i & clique_j)
    if sep:
        mi = marginalization_matrix(scope_i, sep)
        mj = marginalization_matrix(scope_j, sep)
        for s in range(mi.shape[0]):
            rows.append(np.concatenate([mi[s], -mj[s]]))
            rhs.append(0.0)
    x = _solve_feasible(np.array(rows), np.array(rhs), ni + nj)
    if x is None:
        return None
    pi, pj = x[:ni], x[ni:]
    return pi / pi.sum(), pj / pj.sum()


def pairwise_consistent(model: Model, clique_i: frozenset[str], clique_j: frozenset[str]
                        ) -> tuple[bool, tuple[JointTable, JointTable] | None]:
    """True iff each clique admits a distribution satisfying its own
    constraints such that the two agree on the shared variables; decided
    as one joint feasibility problem."""
    sol = _pairwise_lp(model, frozenset(clique_i), frozenset(clique_j))
    if sol is None:
        return False, None
    pi, pj = sol
    wi = JointTable(_clique_scope(model, frozenset(clique_i)), pi)
    wj = JointTable(_clique_scope(model, frozenset(clique_j)), pj)
    return True, (wi, wj)


def _tree_witnesses(model: Model, d: Decomposition) -> tuple[tuple[frozenset[str], JointTable], ...] | None:
    """One feasibility problem over all cliques jointly, agreement imposed
    along the running-intersection anchor edges.  Solutions glue into a
    full joint distribution, so existence matches global consistency."""
    order = d.rip.order
    scopes = [_clique_scope(model, c) for c in order]
    systems = [to_linear(model.constraints, s) for s in scopes]
    sizes = [ls.size for ls in systems]
    offs = np.cumsum([0] + sizes)
    total = int(offs[-1])
    rows, rhs = [], []

    def embed(vec: np.ndarray, i: int) -> np.ndarray:
        out = np.zeros(total)
        out[offs[i]:offs[i] + sizes[i]] = vec
        return out

    for i, ls in enumerate(systems):
        for r in ls.rows:
            rows.append(embed(r.coeffs, i))
            rhs.append(0.0)
        rows.append(embed(np.ones(sizes[i]), i))
        rhs.append(1.0)
    for i in range(1, len(order)):
        j = d.rip.anchors[i]
        sep = model.ordered_scope(order[i] & order[j])
        if not sep:
            continue
        mi = marginalization_matrix(scopes[i], sep)
        mj = marginalization_matrix(scopes[j], sep)
        for s in range(mi.shape[0]):
            rows.append(embed(mi[s], i) - embed(mj[s], j))
            rhs.append(0.0)
    x = _solve_feasible(np.array(rows), np.array(rhs), total)
    if x is None:
        return None
    out = []
    for i, c in enumerate(order):
        p = x[offs[i]:offs[i] + sizes[i]]
        out.append((c, JointTable(scopes[i], p / p.sum())))
    return tuple(out)


def local_check(model: Model, d: Decomposition) -> ConsistencyReport:
    """Consistency over an acyclic decomposition, checked clique-locally.

    The first clique is checked alone; each later clique is checked
    pairwise against its anchor.  When every check passes, one joint
    per-clique feasibility pass produces witnesses that calibrate on the
    separators (and conclusively settles the rare case where the chain of
    pairwise checks misses a longer-range contradiction).
    """
    hg = Hypergraph(tuple(sorted(set().union(*d.cliques))), d.cliques)
    if not graham_acyclic(hg):
        raise ValueError("decomposition is not acyclic; local check inapplicable")
    order = d.rip.order
    s0 = order[0]
    ls0 = to_linear(model.constraints, _clique_scope(model, s0))
    if nonneg_feasible(ls0) is None:
        return ConsistencyReport(False, rank_ok=None, feasible=False, witnesses=(),
                                 culprit=(s0, s0))
    for i in range(1, len(order)):
        anchor = order[d.rip.anchors[i]]
        ok, _ = pairwise_consistent(model, order[i], anchor)
        if not ok:
            return ConsistencyReport(False, rank_ok=None, feasible=False, witnesses=(),
                                     culprit=(order[i], anchor))
    wits = _tree_witnesses(model, d)
    if wits is None:
        return ConsistencyReport(
            False, rank_ok=None, feasible=False, witnesses=(), culprit=None,
            note="anchor-pairwise checks passed but no jointly calibrated "
                 "per-clique tables exist")
    return ConsistencyReport(True, rank_ok=None, feasible=True, witnesses=wits)


def format_report(report: ConsistencyReport, model: Model | None = None,
                  show_witnesses: bool = False) -> str:
    lines = [report.verdict]
    if model is not None:
        for clique, _ in report.witnesses:
            scope = ",".join(model.ordered_scope(clique))
            count = sum(1 for c in model.constraints if c.scope <= clique)
            lines.append(f"clique {{{scope}}}: {count} constraints")
    if report.culprit is not None:
        a, b = report.culprit
        lines.append("culprit: {%s} vs {%s}" % (",".join(sorted(a)), ",".join(sorted(b))))
    if report.note:
        lines.append(f"note: {report.note}")
    if show_witnesses:
        for _, table in report.witnesses:
            lines.append(dist.serialize_table(table).rstrip("\n"))
    return "\n".join(lines) + "\n"
