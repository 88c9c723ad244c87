"""Core symbolic model: formulas, sequents, rule schemas, multiset matching,
backward rule application and derivation checking.

Everything here is immutable and order-insensitive: sequent sides are
multisets, represented as canonically sorted tuples so that structural
equality and hashing coincide with multiset equality.  Formula occurrences
are addressed positionally as ``(side, index)`` into the sorted tuple.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


class KernelError(Exception):
    pass


class NoMatch(KernelError):
    pass


class SpecError(KernelError):
    """A calculus or rule schema violates a structural invariant."""


# ---------------------------------------------------------------------------
# Formulas and formula patterns
# ---------------------------------------------------------------------------
#
# One term language serves both concrete formulas and schematic patterns:
# a term with no metavariables is a concrete formula.

@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class MVar:
    """Formula metavariable; matches any formula."""
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App:
    conn: str
    args: tuple["Term", ...]

    def __str__(self) -> str:
        return f"{self.conn}({', '.join(str(a) for a in self.args)})"


Term = Union[Atom, MVar, App]


def term_key(t: Term):
    if isinstance(t, Atom):
        return (0, t.name)
    if isinstance(t, MVar):
        return (1, t.name)
    return (2, t.conn, tuple(term_key(a) for a in t.args))


def is_ground(t: Term) -> bool:
    if isinstance(t, Atom):
        return True
    if isinstance(t, MVar):
        return False
    return all(is_ground(a) for a in t.args)


def term_mvars(t: Term) -> set[str]:
    if isinstance(t, Atom):
        return set()
    if isinstance(t, MVar):
        return {t.name}
    out: set[str] = set()
    for a in t.args:
        out |= term_mvars(a)
    return out


def subst_term(t: Term, fmap: dict[str, Term]) -> Term:
    if isinstance(t, Atom):
        return t
    if isinstance(t, MVar):
        got = fmap.get(t.name)
        if got is None:
            return t
        # bindings may themselves mention bound metavariables
        return subst_term(got, fmap)
    return App(t.conn, tuple(subst_term(a, fmap) for a in t.args))


def mset(terms) -> tuple[Term, ...]:
    """Canonical multiset form: sorted tuple."""
    return tuple(sorted(terms, key=term_key))


def mset_remove(terms: tuple[Term, ...], index: int) -> tuple[Term, ...]:
    return terms[:index] + terms[index + 1:]


# ---------------------------------------------------------------------------
# Sequents and sequent patterns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sequent:
    """Concrete sequent: two multisets of ground formulas."""
    left: tuple[Term, ...]
    right: tuple[Term, ...]

    @staticmethod
    def make(left, right) -> "Sequent":
        return Sequent(mset(left), mset(right))

    def size(self) -> int:
        return len(self.left) + len(self.right)

    def get(self, occ: tuple[str, int]) -> Term:
        side, i = occ
        return (self.left if side == "L" else self.right)[i]

    def occurrences(self) -> list[tuple[str, int]]:
        return [("L", i) for i in range(len(self.left))] + \
               [("R", i) for i in range(len(self.right))]

    def __str__(self) -> str:
        l = ", ".join(str(t) for t in self.left)
        r = ", ".join(str(t) for t in self.right)
        return f"{l} |- {r}"


@dataclass(frozen=True)
class SeqPattern:
    """Schematic sequent: formula patterns plus context variables per side.

    Context variables stand for arbitrary multisets of formulas.  A
    SeqPattern with no context variables and only ground terms denotes a
    single concrete sequent.
    """
    left: tuple[Term, ...]
    left_vars: tuple[str, ...]
    right: tuple[Term, ...]
    right_vars: tuple[str, ...]

    @staticmethod
    def make(left, left_vars, right, right_vars) -> "SeqPattern":
        return SeqPattern(mset(left), tuple(sorted(left_vars)),
                          mset(right), tuple(sorted(right_vars)))

    def side(self, s: str) -> tuple[tuple[Term, ...], tuple[str, ...]]:
        return (self.left, self.left_vars) if s == "L" else (self.right, self.right_vars)

    def get(self, occ: tuple[str, int]) -> Term:
        side, i = occ
        return (self.left if side == "L" else self.right)[i]

    def all_vars(self) -> tuple[str, ...]:
        return self.left_vars + self.right_vars

    def mvars(self) -> set[str]:
        out: set[str] = set()
        for t in self.left + self.right:
            out |= term_mvars(t)
        return out

    def is_concrete(self) -> bool:
        return not self.left_vars and not self.right_vars and \
            all(is_ground(t) for t in self.left + self.right)

    def to_sequent(self) -> Sequent:
        if not self.is_concrete():
            raise KernelError(f"not concrete: {self}")
        return Sequent(self.left, self.right)

    def __str__(self) -> str:
        def side(terms, vars_):
            parts = list(vars_) + [str(t) for t in terms]
            return ", ".join(parts) if parts else "."
        return f"{side(self.left, self.left_vars)} |- {side(self.right, self.right_vars)}"


def lift_sequent(s: Sequent) -> SeqPattern:
    return SeqPattern(s.left, (), s.right, ())


# ---------------------------------------------------------------------------
# Substitutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Fragment:
    """What a context variable stands for: formulas plus residual variables."""
    terms: tuple[Term, ...]
    vars: tuple[str, ...]

    @staticmethod
    def make(terms, vars_) -> "Fragment":
        return Fragment(mset(terms), tuple(sorted(vars_)))

    def __str__(self) -> str:
        parts = list(self.vars) + [str(t) for t in self.terms]
        return "{" + ", ".join(parts) + "}"


EMPTY_FRAGMENT = Fragment((), ())


@dataclass(frozen=True)
class Substitution:
    """Total assignment for a pattern's metavariables and context variables."""
    fmap: tuple[tuple[str, Term], ...]
    cmap: tuple[tuple[str, Fragment], ...]

    @staticmethod
    def make(fmap: dict[str, Term], cmap: dict[str, Fragment]) -> "Substitution":
        return Substitution(tuple(sorted(fmap.items())),
                            tuple(sorted(cmap.items())))

    def formulas(self) -> dict[str, Term]:
        return dict(self.fmap)

    def contexts(self) -> dict[str, Fragment]:
        return dict(self.cmap)

    def __str__(self) -> str:
        fs = [f"{k} -> {v}" for k, v in self.fmap]
        cs = [f"{k} -> {v}" for k, v in self.cmap]
        return "{" + "; ".join(fs + cs) + "}"


def apply_subst(p: SeqPattern, sub: Substitution) -> SeqPattern:
    fmap = sub.formulas()
    cmap = sub.contexts()

    def do_side(terms, vars_):
        out_terms = [subst_term(t, fmap) for t in terms]
        out_vars: list[str] = []
        for v in vars_:
            frag = cmap.get(v)
            if frag is None:
                out_vars.append(v)
            else:
                out_terms.extend(subst_term(t, fmap) for t in frag.terms)
                out_vars.extend(frag.vars)
        return out_terms, out_vars

    lt, lv = do_side(p.left, p.left_vars)
    rt, rv = do_side(p.right, p.right_vars)
    return SeqPattern.make(lt, lv, rt, rv)


# ---------------------------------------------------------------------------
# First-order unification over formula terms
# ---------------------------------------------------------------------------

def walk(t: Term, sub: dict[str, Term]) -> Term:
    while isinstance(t, MVar) and t.name in sub:
        t = sub[t.name]
    return t


def occurs(name: str, t: Term, sub: dict[str, Term]) -> bool:
    t = walk(t, sub)
    if isinstance(t, MVar):
        return t.name == name
    if isinstance(t, App):
        return any(occurs(name, a, sub) for a in t.args)
    return False


def unify(a: Term, b: Term, sub: dict[str, Term]) -> Optional[dict[str, Term]]:
    a = walk(a, sub)
    b = walk(b, sub)
    if isinstance(a, MVar):
        if isinstance(b, MVar) and a.name == b.name:
            return sub
        if occurs(a.name, b, sub):
            return None
        new = dict(sub)
        new[a.name] = b
        return new
    if isinstance(b, MVar):
        return unify(b, a, sub)
    if isinstance(a, Atom) and isinstance(b, Atom):
        return sub if a.name == b.name else None
    if isinstance(a, App) and isinstance(b, App):
        if a.conn != b.conn or len(a.args) != len(b.args):
            return None
        cur = sub
        for x, y in zip(a.args, b.args):
            cur = unify(x, y, cur)
            if cur is None:
                return None
        return cur
    return None


def resolve(t: Term, sub: dict[str, Term]) -> Term:
    t = walk(t, sub)
    if isinstance(t, App):
        return App(t.conn, tuple(resolve(a, sub) for a in t.args))
    return t


class NameGen:
    """Deterministic fresh-name source for context variable pieces."""

    def __init__(self, taken=()):
        self.taken = set(taken)
        self.counter = 0

    def fresh(self, base: str) -> str:
        while True:
            self.counter += 1
            cand = f"{base}.{self.counter}"
            if cand not in self.taken:
                self.taken.add(cand)
                return cand


# ---------------------------------------------------------------------------
# Sequent matching
# ---------------------------------------------------------------------------
#
# match_sequent(pattern, target) enumerates every substitution under which
# the pattern instantiates to the target, up to multiset-partition choice.
# The target may be a concrete Sequent or itself a SeqPattern; in the
# schematic case the target's own variables may be refined: a target
# metavariable can be instantiated, and a target context variable can be
# split into fresh pieces, some of which are captured by the pattern.

@dataclass(frozen=True)
class SideSolution:
    # pattern ctx var -> fragment it absorbs
    frags: tuple[tuple[str, Fragment], ...]
    # target ctx var -> refinement fragment (carved terms + residual pieces)
    refines: tuple[tuple[str, Fragment], ...]


@dataclass(frozen=True)
class MatchSolution:
    sub: Substitution
    # refinement of the target's context variables, if the target was schematic
    target_refines: tuple[tuple[str, Fragment], ...]


def _match_side(p_terms, p_vars, t_terms, t_vars, sub, namegen,
                pinned: Optional[tuple[int, int]] = None):
    """Yield (fsub, frags, refines, carves) for one sequent side.

    ``pinned`` optionally forces pattern term index to match target term
    index exactly (used for main-occurrence pinning).
    carves: mapping target var -> list of pattern terms carved out of it.
    """
    n = len(p_terms)

    def assign(i, sub, used, carves):
        if i == n:
            yield sub, used, carves
            return
        p = p_terms[i]
        if pinned is not None and pinned[0] == i:
            j = pinned[1]
            if j not in used:
                s2 = unify(p, t_terms[j], sub)
                if s2 is not None:
                    yield from assign(i + 1, s2, used | {j}, carves)
            return
        seen_slots = set()
        for j, t in enumerate(t_terms):
            if j in used:
                continue
            if pinned is not None and pinned[1] == j:
                continue
            marker = term_key(resolve(t, sub))
            if marker in seen_slots:
                continue  # equal target slots are interchangeable
            seen_slots.add(marker)
            s2 = unify(p, t, sub)
            if s2 is not None:
                yield from assign(i + 1, s2, used | {j}, carves)
        for w in t_vars:
            new_carves = dict(carves)
            new_carves[w] = carves.get(w, ()) + (p,)
            yield from assign(i + 1, sub, used, new_carves)

    m = len(p_vars)
    for s2, used, carves in assign(0, sub, set(), {}):
        leftover = [t_terms[j] for j in range(len(t_terms)) if j not in used]
        if m == 0:
            if leftover:
                continue
            refines = {}
            ok = True
            for w in t_vars:
                carved = carves.get(w, ())
                # with no pattern variable to absorb a residue, the target
                # variable is fully consumed by its carvings
                refines[w] = Fragment.make(carved, ())
            if ok:
                yield s2, {}, refines
            continue
        # residual piece per target var (fresh if carved or if it must split)
        if m == 1:
            v = p_vars[0]
            refines = {}
            extra_vars = []
            for w in t_vars:
                carved = carves.get(w, ())
                if carved:
                    piece = namegen.fresh(w)
                    refines[w] = Fragment.make(carved, (piece,))
                    extra_vars.append(piece)
                else:
                    extra_vars.append(w)
            frags = {v: Fragment.make(leftover, extra_vars)}
            yield s2, frags, refines
            continue
        # m >= 2: distribute leftover terms; split each target var into m pieces
        for assign_vec in itertools.product(range(m), repeat=len(leftover)):
            frag_terms = {v: [] for v in p_vars}
            for t, k in zip(leftover, assign_vec):
                frag_terms[p_vars[k]].append(t)
            frag_vars = {v: [] for v in p_vars}
            refines = {}
            for w in t_vars:
                carved = carves.get(w, ())
                pieces = [namegen.fresh(w) for _ in range(m)]
                refines[w] = Fragment.make(carved, pieces)
                for v, piece in zip(p_vars, pieces):
                    frag_vars[v].append(piece)
            frags = {v: Fragment.make(frag_terms[v], frag_vars[v]) for v in p_vars}
            yield s2, frags, refines


def match_sequent_full(pattern: SeqPattern, target, namegen=None):
    """Full matcher; returns deduplicated list of MatchSolution."""
    if isinstance(target, Sequent):
        target = lift_sequent(target)
    if namegen is None:
        namegen = NameGen(set(pattern.all_vars()) | set(target.all_vars()))
    out = {}
    for ls, lfr, lrefs in _match_side(pattern.left, pattern.left_vars,
                                      target.left, target.left_vars, {}, namegen):
        for rs, rfr, rrefs in _match_side(pattern.right, pattern.right_vars,
                                          target.right, target.right_vars, ls, namegen):
            fmap = {name: resolve(MVar(name), rs) for name in rs}
            cmap = {}
            for v, frag in list(lfr.items()) + list(rfr.items()):
                cmap[v] = Fragment.make([resolve(t, rs) for t in frag.terms], frag.vars)
            refines = {}
            for w, frag in list(lrefs.items()) + list(rrefs.items()):
                refines[w] = Fragment.make([resolve(t, rs) for t in frag.terms], frag.vars)
            sub = Substitution.make(fmap, cmap)
            sol = MatchSolution(sub, tuple(sorted(refines.items())))
            key = _solution_key(sol)
            if key not in out:
                out[key] = sol
    return [out[k] for k in sorted(out)]


def _solution_key(sol: MatchSolution):
    def frag_key(fr: Fragment):
        return (tuple(term_key(t) for t in fr.terms), fr.vars)
    return (tuple((k, term_key(v)) for k, v in sol.sub.fmap),
            tuple((k, frag_key(v)) for k, v in sol.sub.cmap),
            tuple((k, frag_key(v)) for k, v in sol.target_refines))


def match_sequent(pattern: SeqPattern, target) -> list[Substitution]:
    """Every substitution under which ``pattern`` instantiates to ``target``.

    Empty result encodes failure.  Against a schematic target, substitutions
    may mention fresh context-variable pieces (target variables split).
    """
    return [s.sub for s in match_sequent_full(pattern, target)]


# ---------------------------------------------------------------------------
# Rule schemas and calculi
# ---------------------------------------------------------------------------

LOGICAL = "logical"
CONTRACTION_LEFT = "contraction_left"
CONTRACTION_RIGHT = "contraction_right"
WEAKENING_LEFT = "weakening_left"
WEAKENING_RIGHT = "weakening_right"
INITIAL = "initial"

STRUCTURAL_KINDS = (CONTRACTION_LEFT, CONTRACTION_RIGHT,
                    WEAKENING_LEFT, WEAKENING_RIGHT, INITIAL)


@dataclass(frozen=True)
class ConnectiveDecl:
    name: str
    arity: int
    notation: Optional[str] = None


@dataclass(frozen=True)
class RuleSchema:
    """An inference rule, read backward from conclusion to premises.

    ``variants`` holds one premise list per selectable form of the rule
    (e.g. the two disjunct choices of an additive right disjunction rule);
    most rules have exactly one variant.  ``main`` designates the principal
    occurrence in the conclusion; ``auxiliaries[variant][premise]`` the
    ancestor occurrences of the main formula in each premise.
    """
    name: str
    kind: str
    conclusion: SeqPattern
    variants: tuple[tuple[SeqPattern, ...], ...]
    main: Optional[tuple[str, int]]
    auxiliaries: tuple[tuple[tuple[tuple[str, int], ...], ...], ...]

    def is_logical(self) -> bool:
        return self.kind == LOGICAL

    def is_contraction(self) -> bool:
        return self.kind in (CONTRACTION_LEFT, CONTRACTION_RIGHT)

    def is_weakening(self) -> bool:
        return self.kind in (WEAKENING_LEFT, WEAKENING_RIGHT)

    def main_term(self) -> Optional[Term]:
        return None if self.main is None else self.conclusion.get(self.main)

    def main_side(self) -> Optional[str]:
        return None if self.main is None else self.main[0]

    def n_premises(self, variant: int = 0) -> int:
        return len(self.variants[variant])

    def is_branching(self) -> bool:
        return any(len(v) >= 2 for v in self.variants)

    def aux_indices(self, variant: int, premise: int) -> tuple[tuple[str, int], ...]:
        return self.auxiliaries[variant][premise]

    def context_carriers(self, variant: int) -> dict[str, set[int]]:
        """Map context carrier (ctx var or pass-through metavar) to the set of
        premises of the variant it occurs in."""
        out: dict[str, set[int]] = {}
        prems = self.variants[variant]
        for i, p in enumerate(prems):
            aux = set(self.auxiliaries[variant][i])
            for v in p.all_vars():
                out.setdefault(v, set()).add(i)
            for side in "LR":
                terms, _ = p.side(side)
                for j, t in enumerate(terms):
                    if isinstance(t, MVar) and (side, j) not in aux:
                        out.setdefault(t.name, set()).add(i)
        return out

    def splits_context(self) -> bool:
        """True when no context carrier is shared between two premises of a
        branching variant (multiplicative); False for context-copying rules."""
        for vi, prems in enumerate(self.variants):
            if len(prems) < 2:
                continue
            for v, where in self.context_carriers(vi).items():
                if len(where) >= 2:
                    return False
        return True

    def max_aux_per_premise(self) -> int:
        best = 0
        for variant in self.auxiliaries:
            for prem in variant:
                best = max(best, len(prem))
        return best


@dataclass(frozen=True)
class Assumptions:
    contraction_implies_weakening: bool = True


@dataclass(frozen=True)
class CalculusSpec:
    name: str
    connectives: tuple[ConnectiveDecl, ...]
    rules: tuple[RuleSchema, ...]
    succedent_arity: str = "multi"  # "multi" | "single"
    assumptions: Assumptions = Assumptions()

    def rule(self, name: str) -> RuleSchema:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def logical_rules(self) -> tuple[RuleSchema, ...]:
        return tuple(r for r in self.rules if r.is_logical())

    def contraction_rules(self) -> tuple[RuleSchema, ...]:
        return tuple(r for r in self.rules if r.is_contraction())

    def has_weakening(self, side: str) -> bool:
        kind = WEAKENING_LEFT if side == "L" else WEAKENING_RIGHT
        return any(r.kind == kind for r in self.rules)

    def has_contraction(self, side: str) -> bool:
        kind = CONTRACTION_LEFT if side == "L" else CONTRACTION_RIGHT
        return any(r.kind == kind for r in self.rules)

    def connective(self, name: str) -> ConnectiveDecl:
        for c in self.connectives:
            if c.name == name:
                return c
        raise KeyError(name)

    def validate(self) -> None:
        names = [r.name for r in self.rules]
        if len(names) != len(set(names)):
            raise SpecError(f"{self.name}: duplicate rule names")
        cnames = [c.name for c in self.connectives]
        if len(cnames) != len(set(cnames)):
            raise SpecError(f"{self.name}: duplicate connective names")
        for c in self.connectives:
            if c.arity < 0:
                raise SpecError(f"{self.name}: negative arity for {c.name}")
        for side, ckind in (("L", CONTRACTION_LEFT), ("R", CONTRACTION_RIGHT)):
            if self.assumptions.contraction_implies_weakening and \
                    self.has_contraction(side) and not self.has_weakening(side):
                raise SpecError(
                    f"{self.name}: contraction on {side} requires weakening on {side}")
        if not any(r.kind == INITIAL for r in self.rules):
            raise SpecError(f"{self.name}: no initial rule declared")
        for r in self.rules:
            self._validate_rule(r)

    def _validate_rule(self, r: RuleSchema) -> None:
        known = {c.name for c in self.connectives}

        def check_terms(p: SeqPattern, where: str):
            for t in p.left + p.right:
                self._check_term(t, known, f"{r.name} {where}")
            if self.succedent_arity == "single":
                if p.right_vars or len(p.right) != 1:
                    raise SpecError(
                        f"{r.name} {where}: single-succedent side must be one formula")

        check_terms(r.conclusion, "conclusion")
        if r.is_logical() and r.main is None:
            raise SpecError(f"{r.name}: logical rule without main formula")
        conc_vars = set(r.conclusion.all_vars())
        conc_mvars = r.conclusion.mvars()
        for vi, prems in enumerate(r.variants):
            for pi, p in enumerate(prems):
                check_terms(p, f"premise {pi + 1}")
                if not set(p.all_vars()) <= conc_vars:
                    raise SpecError(
                        f"{r.name}: premise context variable not in conclusion")
                if not p.mvars() <= conc_mvars:
                    raise SpecError(
                        f"{r.name}: premise metavariable not in conclusion")
        for side in "LR":
            lv = set(r.conclusion.side(side)[1])
            other = set(r.conclusion.side("R" if side == "L" else "L")[1])
            if lv & other:
                raise SpecError(f"{r.name}: context variable used on both sides")

    def _check_term(self, t: Term, known: set[str], where: str) -> None:
        if isinstance(t, App):
            if t.conn not in known:
                raise SpecError(f"{where}: unknown connective {t.conn}")
            if len(t.args) != self.connective(t.conn).arity:
                raise SpecError(f"{where}: arity mismatch for {t.conn}")
            for a in t.args:
                self._check_term(a, known, where)


# ---------------------------------------------------------------------------
# Rule application (backward)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RuleChoice:
    """Replayable record of one backward rule application."""
    rule: str
    variant: int
    main: Optional[tuple[str, int]]
    subst: Substitution


def applications(rule: RuleSchema, goal: Sequent):
    """All ways to apply ``rule`` backward at ``goal``.

    Returns a list of (RuleChoice, premises) pairs in deterministic order.
    Initial rules only close on atoms.
    """
    out = []
    seen = set()
    conc = rule.conclusion
    if rule.main is None:
        for sol in match_sequent_full(conc, goal):
            if rule.kind == INITIAL:
                fm = sol.sub.formulas()
                if not all(isinstance(v, Atom) for v in fm.values()):
                    continue
            for vi, prems in enumerate(rule.variants):
                choice = RuleChoice(rule.name, vi, None, sol.sub)
                premises = tuple(apply_subst(p, sol.sub).to_sequent() for p in prems)
                key = (vi, _subst_key(sol.sub))
                if key not in seen:
                    seen.add(key)
                    out.append((choice, premises))
        return out

    mside, mi = rule.main
    main_pat = conc.get(rule.main)
    goal_terms = goal.left if mside == "L" else goal.right
    for occ_i in range(len(goal_terms)):
        if occ_i > 0 and goal_terms[occ_i] == goal_terms[occ_i - 1]:
            continue  # equal occurrences give identical applications
        pinned = (mi, occ_i)
        p_terms, p_vars = conc.side(mside)
        o_terms, o_vars = conc.side("R" if mside == "L" else "L")
        g_terms = goal_terms
        go_terms = goal.right if mside == "L" else goal.left
        namegen = NameGen(set(conc.all_vars()))
        for s1, fr1, _ in _match_side(p_terms, p_vars, g_terms, (), {}, namegen,
                                      pinned=pinned):
            for s2, fr2, _ in _match_side(o_terms, o_vars, go_terms, (), s1, namegen):
                fmap = {name: resolve(MVar(name), s2) for name in s2}
                cmap = {}
                for v, frag in list(fr1.items()) + list(fr2.items()):
                    cmap[v] = Fragment.make(
                        [resolve(t, s2) for t in frag.terms], frag.vars)
                sub = Substitution.make(fmap, cmap)
                if rule.kind == INITIAL:
                    if not all(isinstance(v, Atom) for v in sub.formulas().values()):
                        continue
                for vi, prems in enumerate(rule.variants):
                    key = (vi, (mside, occ_i), _subst_key(sub))
                    if key in seen:
                        continue
                    seen.add(key)
                    choice = RuleChoice(rule.name, vi, (mside, occ_i), sub)
                    premises = tuple(apply_subst(p, sub).to_sequent() for p in prems)
                    out.append((choice, premises))
    out.sort(key=lambda cp: (cp[0].variant,
                             cp[0].main or ("", -1),
                             _subst_key(cp[0].subst)))
    return out


def _subst_key(sub: Substitution):
    def frag_key(fr: Fragment):
        return (tuple(term_key(t) for t in fr.terms), fr.vars)
    return (tuple((k, term_key(v)) for k, v in sub.fmap),
            tuple((k, frag_key(v)) for k, v in sub.cmap))


def apply_rule(rule: RuleSchema, goal: Sequent, choice: RuleChoice) -> tuple[Sequent, ...]:
    """Replay a recorded choice; raises NoMatch if it does not fit the goal."""
    if choice.rule != rule.name or choice.variant >= len(rule.variants):
        raise NoMatch(f"choice does not belong to rule {rule.name}")
    inst = apply_subst(rule.conclusion, choice.subst)
    if not inst.is_concrete() or inst.to_sequent() != goal:
        raise NoMatch(f"{rule.name}: conclusion instance differs from goal")
    if choice.main is not None:
        if rule.main is None:
            raise NoMatch(f"{rule.name}: rule has no main formula")
        main_inst = subst_term(rule.main_term(), choice.subst.formulas())
        if goal.get(choice.main) != main_inst:
            raise NoMatch(f"{rule.name}: main occurrence mismatch")
    if rule.kind == INITIAL:
        if not all(isinstance(v, Atom) for v in choice.subst.formulas().values()):
            raise NoMatch(f"{rule.name}: initial closes on atoms only")
    return tuple(apply_subst(p, choice.subst).to_sequent()
                 for p in rule.variants[choice.variant])


# ---------------------------------------------------------------------------
# Derivations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Derivation:
    root: Sequent
    choice: RuleChoice
    children: tuple["Derivation", ...]

    def count_nodes(self) -> int:
        return 1 + sum(c.count_nodes() for c in self.children)

    def rules_used(self) -> list[str]:
        out = [self.choice.rule]
        for c in self.children:
            out.extend(c.rules_used())
        return out


@dataclass(frozen=True)
class ValidationIssue:
    path: tuple[int, ...]
    reason: str

    def __str__(self) -> str:
        return f"at node {'/'.join(map(str, self.path)) or 'root'}: {self.reason}"


def validate_derivation(calc: CalculusSpec, d: Derivation) -> Optional[ValidationIssue]:
    """None when the derivation replays cleanly; otherwise the first failure."""
    return _validate_at(calc, d, ())


def _validate_at(calc, d, path):
    try:
        rule = calc.rule(d.choice.rule)
    except KeyError:
        return ValidationIssue(path, f"unknown rule {d.choice.rule}")
    try:
        premises = apply_rule(rule, d.root, d.choice)
    except NoMatch as e:
        return ValidationIssue(path, str(e))
    got = tuple(c.root for c in d.children)
    if premises != got:
        return ValidationIssue(
            path, f"premises of {rule.name} do not match children")
    if not d.children and rule.kind != INITIAL and rule.variants[d.choice.variant]:
        return ValidationIssue(path, f"leaf is not an initial instance ({rule.name})")
    for i, c in enumerate(d.children):
        issue = _validate_at(calc, c, path + (i,))
        if issue is not None:
            return issue
    return None
