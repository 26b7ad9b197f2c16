"""Shared fixtures: canonical models, frozen oracle values, and random
generators used by the property suites.

Frozen tables were computed by independent routes (direct primal
maximization with SLSQP for the max-entropy joints; 30-digit closed-form
arithmetic for the single-update posterior) and are cross-checked against
the package's own solvers in the tests.
"""

from __future__ import annotations

import itertools

import numpy as np

from maxentbn import (ConditionalConstraint, ConstraintSet, Literal,
                      MarginalConstraint, Model, Variable, parse_model)

# Directed 2-cycle model: P(A|B)=0.7, P(B|A)=0.8.
FIG21_TEXT = "vars A B\nP(A|B)=0.7\nP(B|A)=0.8\n"

# Four-variable model with the C<->D cycle.  The conditional table uses the
# diagonal orientation consistent with this example's reference linear
# equations and result tables (see notes in the test module).
MINING_TEXT = """vars A B C D
P(A)=0.2
P(B)=0.7
P(C|A,D)=0.6
P(C|~A,D)=0.2
P(C|A,~D)=0.2
P(C|~A,~D)=0.1
P(D|B,C)=0.8
P(D|~B,C)=0.3
P(D|B,~C)=0.4
P(D|~B,~C)=0.2
"""

QUAD_TEXT = "vars A B\nP(A|~B)=0.2\nP(A|B)=0.7\nP(B|~A)=0.1\nP(B|A)=0.8\n"

CONTRADICTION_TEXT = ("vars A B C\nP(B|A)=1\nP(B|~A)=1\n"
                      "P(B|C)=0\nP(B|~C)=0\n")

# Six-node ring-of-triangles neighbor graph whose raw clique cover is not
# acyclic; the reference answer resolves it with a single chord.
SIXRING_EDGES = [("A", "C"), ("A", "F"), ("C", "F"), ("B", "D"), ("B", "E"),
                 ("D", "E"), ("C", "D"), ("E", "F")]

# Exact ME joint of the 2-cycle model, scope (A, B); printed reference
# rounds to (0.2808, 0.1836, 0.1071, 0.4285).  Computed by primal SLSQP;
# agrees with the dual solver to 2e-9.
FIG21_JOINT = np.array([0.280750117882, 0.183638267775,
                        0.107122322869, 0.428489291474])

# Printed approximation after two interleaved applications of each
# constraint starting from uniform.
FIG21_TWO_EACH = np.array([0.2807, 0.1808, 0.1075, 0.4299])

# Exact ME joint of the mining model, scope (A, B, C, D); primal SLSQP,
# agrees with the dual solver to 4e-9.
MINING_JOINT = np.array([
    0.155763417635, 0.040292222438, 0.033122143841, 0.010622907248,
    0.292173349110, 0.201541762678, 0.016648608020, 0.049835589031,
    0.029986256474, 0.006145196089, 0.014346891314, 0.009720964961,
    0.056246747667, 0.030738301840, 0.007211359721, 0.045604281933])

# Reference exact-ME marginal tables for the mining model.
MINING_ACD = np.array([0.4479, 0.2419, 0.0498, 0.0604,
                       0.0862, 0.0369, 0.0216, 0.0553])
MINING_BCD = np.array([0.1857, 0.0464, 0.0474, 0.0203,
                       0.3484, 0.2323, 0.0239, 0.0954])

# Reference cycle-by-cycle decomposed-updating tables (cycles 2..5).
TABLE71 = {
    2: (np.array([0.444003, 0.243843, 0.042686, 0.068039,
                  0.094973, 0.032127, 0.020544, 0.053785]),
        np.array([0.200033, 0.050008, 0.036707, 0.015732,
                  0.338943, 0.225962, 0.026523, 0.106092])),
    3: (np.array([0.439272, 0.247594, 0.048808, 0.061898,
                  0.091531, 0.035206, 0.022883, 0.052808]),
        np.array([0.193179, 0.049959, 0.042916, 0.015804,
                  0.337624, 0.232840, 0.028775, 0.098903])),
    4: (np.array([0.446850, 0.242888, 0.046578, 0.063684,
                  0.090022, 0.034535, 0.021113, 0.054330]),
        np.array([0.193906, 0.048530, 0.042647, 0.018209,
                  0.342965, 0.228894, 0.025045, 0.099804])),
    5: (np.array([0.444434, 0.244491, 0.049382, 0.061123,
                  0.088470, 0.035993, 0.022118, 0.053990]),
        np.array([0.190041, 0.048267, 0.045553, 0.018225,
                  0.342863, 0.232217, 0.025946, 0.096887])),
}

# Closed-form posterior of uniform (A, B) under P(A|B)=0.7:
# t = 3/7, factors t^0.7 / t^-0.3 on the B states, renormalized.
COND_UPDATE_07 = np.array([0.26027956067758815, 0.14383226359344711,
                           0.26027956067758815, 0.33560861505137658])


def fig21() -> Model:
    return parse_model(FIG21_TEXT)


def mining() -> Model:
    return parse_model(MINING_TEXT)


def quad() -> Model:
    return parse_model(QUAD_TEXT)


def contradiction() -> Model:
    return parse_model(CONTRADICTION_TEXT)


def model_of(names: str, *constraints) -> Model:
    """Short-hand model builder, e.g. model_of("AB", cc("A", "B", 0.7))."""
    vars_ = tuple(Variable(n, i) for i, n in enumerate(names))
    return Model(vars_, ConstraintSet(tuple(constraints)))


def cc(target: str, condition: str, value: float) -> ConditionalConstraint:
    """cc("A", "B,~C", 0.7) -> P(A|B,~C)=0.7."""
    lits = tuple(_lit(s) for s in condition.split(",") if s)
    return ConditionalConstraint(_lit(target), lits, value)


def mc(literals: str, value: float) -> MarginalConstraint:
    return MarginalConstraint(tuple(_lit(s) for s in literals.split(",") if s), value)


def _lit(s: str) -> Literal:
    s = s.strip()
    return Literal(s[1:], False) if s.startswith("~") else Literal(s, True)


def random_positive_table(rng: np.random.Generator, k: int) -> np.ndarray:
    p = rng.random(1 << k) + 0.05
    return p / p.sum()


def random_model(rng: np.random.Generator, n_vars: int | None = None,
                 n_conditionals: int | None = None,
                 n_marginals: int | None = None,
                 value_range: tuple[float, float] = (0.05, 0.95)) -> Model:
    """Random constraint model with interior probability values; roughly
    half of the draws at 4-6 variables are globally inconsistent."""
    n = n_vars if n_vars is not None else int(rng.integers(4, 7))
    names = "ABCDEFGH"[:n]
    lo, hi = value_range
    constraints = []
    cells = set()
    n_cond = n_conditionals if n_conditionals is not None else int(rng.integers(4, 10))
    for _ in range(n_cond):
        target = names[rng.integers(n)]
        others = [v for v in names if v != target]
        size = int(rng.integers(1, min(3, len(others)) + 1))
        cond_vars = sorted(rng.choice(others, size=size, replace=False))
        cond = tuple(Literal(v, bool(rng.integers(2))) for v in cond_vars)
        cell = (target, frozenset((l.name, l.positive) for l in cond))
        if cell in cells:
            continue
        cells.add(cell)
        constraints.append(ConditionalConstraint(
            Literal(target), cond, float(rng.uniform(lo, hi))))
    n_marg = n_marginals if n_marginals is not None else int(rng.integers(0, 4))
    for _ in range(n_marg):
        var = names[rng.integers(n)]
        lit = Literal(var, bool(rng.integers(2)))
        cell = frozenset([(lit.name, lit.positive)])
        if cell in cells:
            continue
        cells.add(cell)
        constraints.append(MarginalConstraint((lit,), float(rng.uniform(lo, hi))))
    vars_ = tuple(Variable(nm, i) for i, nm in enumerate(names))
    return Model(vars_, ConstraintSet(tuple(constraints)))


def random_hypergraph(rng: np.random.Generator, max_vertices: int = 8,
                      max_edges: int = 6):
    """Random hypergraph; mixes raw random subsets with clique covers of
    random chordal-ish graphs so both acyclic and cyclic cases are
    common."""
    from maxentbn import Hypergraph, NeighborGraph, maximal_cliques

    n = int(rng.integers(2, max_vertices + 1))
    names = tuple("ABCDEFGH"[:n])
    if rng.random() < 0.65:
        m = int(rng.integers(1, max_edges + 1))
        edges = []
        for _ in range(m):
            size = int(rng.integers(min(2, n), min(4, n) + 1))
            edges.append(frozenset(rng.choice(names, size=size, replace=False)))
        return Hypergraph(names, tuple(edges))
    # clique cover of a random graph (acyclic iff the graph is chordal)
    pairs = list(itertools.combinations(names, 2))
    chosen = frozenset(frozenset(p) for p in pairs if rng.random() < 0.45)
    g = NeighborGraph(names, chosen)
    cliques = tuple(maximal_cliques(g))[:max_edges]
    return Hypergraph(names, cliques)
