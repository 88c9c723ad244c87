"""Permutation graph construction, maximal cliques, partitions and the
focusable-bipartition filter."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .kernel import CalculusSpec, RuleSchema
from .permcheck import (
    Budget, PermResult, permutes_up, HOLDS, HOLDS_VACUOUSLY, FAILS, UNKNOWN,
)


@dataclass(frozen=True)
class PermutationGraph:
    vertices: tuple[str, ...]
    verdicts: tuple[tuple[tuple[str, str], PermResult], ...]
    edges: frozenset[tuple[str, str]]
    unknown: frozenset[tuple[str, str]]

    def verdict(self, a: str, b: str) -> PermResult:
        for pair, res in self.verdicts:
            if pair == (a, b):
                return res
        raise KeyError((a, b))

    def verdict_map(self) -> dict[tuple[str, str], PermResult]:
        return dict(self.verdicts)

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self.edges


@dataclass(frozen=True)
class Clique:
    members: tuple[str, ...]

    @staticmethod
    def make(members) -> "Clique":
        return Clique(tuple(sorted(members)))

    def __contains__(self, name: str) -> bool:
        return name in self.members


@dataclass(frozen=True)
class PermutationPartition:
    components: tuple[tuple[str, ...], ...]

    @staticmethod
    def make(components) -> "PermutationPartition":
        return PermutationPartition(
            tuple(sorted((tuple(sorted(c)) for c in components))))


@dataclass(frozen=True)
class ConditionReport:
    rule: str
    at_most_one_aux: bool
    splits_context: bool

    def ok(self) -> bool:
        return self.at_most_one_aux and self.splits_context


@dataclass(frozen=True)
class FocusableBipartition:
    negative: tuple[str, ...]
    positive: tuple[str, ...]
    hierarchy_witness: tuple[tuple[str, str], ...]  # (beta, alpha) edges used
    conditions: tuple[ConditionReport, ...]

    @staticmethod
    def make(negative, positive, hierarchy_witness, conditions):
        return FocusableBipartition(
            tuple(sorted(negative)), tuple(sorted(positive)),
            tuple(sorted(hierarchy_witness)), tuple(conditions))


def build_permutation_graph(calc: CalculusSpec,
                            budget: Optional[Budget] = None) -> PermutationGraph:
    """Run the permutation check over all ordered pairs of logical rules.

    Unknown verdicts are recorded but never contribute edges; self loops are
    recorded and likewise kept out of the edge set.
    """
    rules = sorted(calc.logical_rules(), key=lambda r: r.name)
    verdicts = []
    edges = set()
    unknown = set()
    for a, b in itertools.product(rules, repeat=2):
        res = permutes_up(a, b, calc, budget)
        verdicts.append(((a.name, b.name), res))
        if res.verdict == UNKNOWN:
            unknown.add((a.name, b.name))
        elif res.holds_edge() and a.name != b.name:
            edges.add((a.name, b.name))
    return PermutationGraph(
        vertices=tuple(r.name for r in rules),
        verdicts=tuple(verdicts),
        edges=frozenset(edges),
        unknown=frozenset(unknown))


def symmetrize(g: PermutationGraph) -> frozenset[tuple[str, str]]:
    """Keep exactly the mutual pairs, as sorted 2-tuples."""
    return frozenset(tuple(sorted((a, b))) for a, b in g.edges
                     if (b, a) in g.edges)


def maximal_cliques(vertices, undirected_edges) -> tuple[Clique, ...]:
    """Exact maximal-clique enumeration (Bron-Kerbosch with pivoting),
    lexicographically ordered output."""
    adj: dict[str, set[str]] = {v: set() for v in vertices}
    for a, b in undirected_edges:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    found: list[frozenset[str]] = []

    def bk(r: set, p: set, x: set):
        if not p and not x:
            found.append(frozenset(r))
            return
        pivot = max(sorted(p | x), key=lambda u: len(adj[u] & p))
        for v in sorted(p - adj[pivot]):
            bk(r | {v}, p & adj[v], x & adj[v])
            p = p - {v}
            x = x | {v}

    bk(set(), set(vertices), set())
    return tuple(sorted((Clique.make(c) for c in found),
                        key=lambda c: c.members))


def cliques_of(g: PermutationGraph) -> tuple[Clique, ...]:
    return maximal_cliques(g.vertices, symmetrize(g))


def enumerate_partitions(g: PermutationGraph, cliques,
                         include_singletons: bool = False) -> list[PermutationPartition]:
    """Bipartitions from pairs of covering cliques, assigning each shared
    vertex to exactly one side.  The all-singletons fallback partition is
    available behind a flag."""
    out: list[PermutationPartition] = []
    seen = set()
    vertices = set(g.vertices)
    pairs = itertools.combinations(cliques, 2)
    for k1, k2 in pairs:
        s1, s2 = set(k1.members), set(k2.members)
        if s1 | s2 != vertices:
            continue
        shared = sorted(s1 & s2)
        for assignment in itertools.product((0, 1), repeat=len(shared)):
            c1 = set(s1)
            c2 = set(s2)
            for v, side in zip(shared, assignment):
                (c2 if side == 0 else c1).discard(v)
            if not c1 or not c2:
                continue
            p = PermutationPartition.make([c1, c2])
            if p not in seen:
                seen.add(p)
                out.append(p)
    if include_singletons:
        p = PermutationPartition.make([{v} for v in vertices])
        if p not in seen:
            out.append(p)
    out.sort(key=lambda p: p.components)
    return out


def hierarchy(p: PermutationPartition,
              g: PermutationGraph) -> frozenset[tuple[int, int]]:
    """Component pairs (i, j) with C_i below C_j: every rule of C_j permutes
    up every rule of C_i.  Reflexive pairs require mutual permutation inside
    the component."""
    out = set()
    for i, ci in enumerate(p.components):
        for j, cj in enumerate(p.components):
            ok = True
            for a_i in ci:
                for a_j in cj:
                    if a_i == a_j:
                        continue
                    if (a_j, a_i) not in g.edges:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                out.add((i, j))
    return frozenset(out)


def check_conditions(calc: CalculusSpec, positive) -> list[ConditionReport]:
    """The two schema-side focusability conditions on the positive component:
    at most one auxiliary per premise, and context splitting for branching
    rules."""
    out = []
    for name in sorted(positive):
        r = calc.rule(name)
        one_aux = r.max_aux_per_premise() <= 1
        splits = (not r.is_branching()) or r.splits_context()
        out.append(ConditionReport(name, one_aux, splits))
    return out


def focusable_partitions(calc: CalculusSpec,
                         g: PermutationGraph) -> list[FocusableBipartition]:
    """Bipartitions whose orientation satisfies all focusability conditions:
    two components with the negative one below the positive one, positive
    rules introducing at most one auxiliary per premise, and branching
    positive rules splitting the context."""
    cliques = cliques_of(g)
    out = []
    seen = set()
    for p in enumerate_partitions(g, cliques):
        if len(p.components) != 2:
            continue
        for neg, pos in (p.components, p.components[::-1]):
            h = hierarchy(p, g)
            i_neg = p.components.index(neg)
            i_pos = p.components.index(pos)
            if (i_neg, i_pos) not in h:
                continue
            conds = check_conditions(calc, pos)
            if not all(c.ok() for c in conds):
                continue
            witness = tuple(sorted((b, a) for a in neg for b in pos if a != b))
            fb = FocusableBipartition.make(neg, pos, witness, tuple(conds))
            if (fb.negative, fb.positive) not in seen:
                seen.add((fb.negative, fb.positive))
                out.append(fb)
    out.sort(key=lambda f: (f.negative, f.positive))
    return out


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------

def to_dot(g: PermutationGraph, partition: Optional[FocusableBipartition] = None) -> str:
    """Directed permutation graph in DOT form: mutual pairs double-headed,
    vacuous edges dashed, vertices annotated with their component."""
    vm = g.verdict_map()
    lines = ["digraph permutation {"]
    for v in g.vertices:
        attrs = []
        if partition is not None:
            if v in partition.negative:
                attrs.append('comment="negative"')
                attrs.append("shape=box")
            elif v in partition.positive:
                attrs.append('comment="positive"')
                attrs.append("shape=ellipse")
        lines.append(f'  "{v}"' + (f" [{', '.join(attrs)}]" if attrs else "") + ";")
    done = set()
    for a, b in sorted(g.edges):
        if (a, b) in done:
            continue
        mutual = (b, a) in g.edges
        va = vm[(a, b)].verdict == HOLDS_VACUOUSLY
        if mutual:
            vb = vm[(b, a)].verdict == HOLDS_VACUOUSLY
            style = ' [dir=both, style=dashed]' if va and vb else " [dir=both]"
            x, y = sorted((a, b))
            lines.append(f'  "{x}" -> "{y}"{style};')
            done.add((a, b))
            done.add((b, a))
        else:
            style = " [style=dashed]" if va else ""
            lines.append(f'  "{a}" -> "{b}"{style};')
            done.add((a, b))
    lines.append("}")
    return "\n".join(lines) + "\n"
