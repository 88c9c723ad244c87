"""Bounded backward proof search for base and focused calculi, seeded
sequent corpora, and the cross-validation harness comparing the two."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .focusgen import (
    FNode, FSeq, FocusedCalculus, end_move, erase_focus, initial_close,
    lifted_applications, selections, store_move, validate_focused,
    NEG_LABEL, POS_LABEL, NEUTRAL_LABEL, NEGATIVE, POSITIVE,
)
from .kernel import (
    App, Atom, CalculusSpec, Derivation, Fragment, MVar, RuleChoice, Sequent,
    Substitution, Term, applications, apply_subst, resolve, subst_term,
    term_key, unify, validate_derivation, INITIAL,
)

PROVED = "proved"
REFUTED = "refuted"
BOUND_HIT = "bound_hit"


@dataclass(frozen=True)
class SearchBounds:
    max_depth: int = 40
    max_nodes: int = 200_000
    allow_contraction_copies: int = 2

    def __post_init__(self):
        if min(self.max_depth, self.max_nodes, self.allow_contraction_copies) <= 0:
            raise ValueError("bounds must be positive")


@dataclass
class SearchStats:
    nodes: int = 0
    max_depth_reached: int = 0


@dataclass(frozen=True)
class SearchOutcome:
    status: str  # proved | refuted | bound_hit
    derivation: Optional[object] = None  # Derivation or FNode
    nodes: int = 0
    max_depth: int = 0

    def proved(self) -> bool:
        return self.status == PROVED


# ---------------------------------------------------------------------------
# Base-calculus search
# ---------------------------------------------------------------------------
#
# Complete backward search under bounds.  Weakening is never searched
# backward: discardable context is absorbed by a liberal initial step whose
# recorded derivation spells the weakening chain out.  Contraction is
# absorbed into rule applications in the standard normal form: a context
# formula may be shared between the premises of a context-splitting rule,
# and a rule may retain a copy of its own main formula in a premise.  Every
# explicit contraction in a proof can be permuted up to one of these two
# uses, so the normal form loses no proofs; the recorded derivation spells
# the contraction steps out.  Copies are capped per formula, and goals
# equal to an ancestor goal are pruned (any proof could be grafted lower).
#
# Refuted is only reported when no branch was cut by a bound.  The failure
# cache holds absolute failures only: a goal enters it when its subtree was
# explored without any bound cut and without any ancestor-dependent loop
# prune, so cached entries are valid in every later context.

class _BaseSearch:
    def __init__(self, calc: CalculusSpec, bounds: SearchBounds):
        self.calc = calc
        self.bounds = bounds
        self.stats = SearchStats()
        self.failed: set[Sequent] = set()
        self.logical = sorted(calc.logical_rules(), key=lambda r: r.name)
        self.has_init = any(r.kind == INITIAL for r in calc.rules)
        self.has_contraction = any(r.is_contraction() for r in calc.rules)

    def prove(self, goal: Sequent) -> SearchOutcome:
        result, bound_hit, _ = self._visit(goal, 0, (), {})
        if result is not None:
            return SearchOutcome(PROVED, result, self.stats.nodes,
                                 self.stats.max_depth_reached)
        status = BOUND_HIT if bound_hit else REFUTED
        return SearchOutcome(status, None, self.stats.nodes,
                             self.stats.max_depth_reached)

    def _visit(self, goal, depth, ancestors, copies):
        """Returns (derivation or None, bound_hit, loop_tainted)."""
        self.stats.nodes += 1
        self.stats.max_depth_reached = max(self.stats.max_depth_reached, depth)
        if self.stats.nodes > self.bounds.max_nodes or \
                depth >= self.bounds.max_depth:
            return None, True, False
        if goal in self.failed:
            return None, False, False
        if self.has_contraction and goal in ancestors:
            return None, False, True

        bound_hit = False
        tainted = False

        init = self._initial(goal)
        if init is not None:
            return init, False, False

        for rule in self.logical:
            for extras, choice, premises in shared_applications(
                    self.calc, rule, goal):
                new_copies = copies
                if extras:
                    over = False
                    new_copies = dict(copies)
                    for side, f in extras:
                        key = (side, f)
                        new_copies[key] = new_copies.get(key, 0) + 1
                        if new_copies[key] > self.bounds.allow_contraction_copies:
                            over = True
                    if over:
                        bound_hit = True
                        continue
                subders = []
                ok = True
                for p in premises:
                    sub, bh, tn = self._visit(p, depth + 1,
                                              ancestors + (goal,), new_copies)
                    bound_hit = bound_hit or bh
                    tainted = tainted or tn
                    if sub is None:
                        ok = False
                        break
                    subders.append(sub)
                if ok:
                    expanded = _expand_goal(goal, extras)
                    node = Derivation(expanded, choice, tuple(subders))
                    node = _contract_chain(self.calc, goal, extras, node)
                    return node, bound_hit, tainted

        if not bound_hit and not tainted:
            self.failed.add(goal)
        return None, bound_hit, tainted

    def _initial(self, goal: Sequent) -> Optional[Derivation]:
        if not self.has_init:
            return None
        shared = sorted((t for t in set(goal.left) & set(goal.right)
                         if isinstance(t, Atom)), key=term_key)
        for a in shared:
            extra_l = len(goal.left) - 1
            extra_r = len(goal.right) - 1
            if (extra_l and not self.calc.has_weakening("L")) or \
                    (extra_r and not self.calc.has_weakening("R")):
                continue
            return _init_with_weakening(self.calc, goal, a)
        return None


def _expand_goal(goal: Sequent, extras) -> Sequent:
    left = list(goal.left)
    right = list(goal.right)
    for side, f in extras:
        (left if side == "L" else right).append(f)
    return Sequent.make(left, right)


def _contract_chain(calc, goal, extras, node: Derivation) -> Derivation:
    """Wrap ``node`` (rooted at the expanded goal) in explicit contraction
    steps back down to ``goal``."""
    for side, f in reversed(list(extras)):
        cname = "c_l" if side == "L" else "c_r"
        rule = calc.rule(cname)
        upper = node.root
        zone = upper.left if side == "L" else upper.right
        lst = list(zone)
        lst.remove(f)
        below = Sequent.make(lst, upper.right) if side == "L" else \
            Sequent.make(upper.left, lst)
        made = None
        for choice, prems in applications(rule, below):
            if prems == (upper,):
                made = Derivation(below, choice, (node,))
                break
        if made is None:
            raise AssertionError(f"{cname} does not reproduce the copy of {f}")
        node = made
    return node


def shared_applications(calc: CalculusSpec, rule, goal: Sequent):
    """Backward applications of a logical rule allowing contraction-absorbed
    copies: context items may be shared between premises of a splitting
    rule and the main formula may be retained, on sides declaring
    contraction.  Yields (extras, choice, premises) with ``extras`` the
    contracted copies; strict applications come first.
    """
    conc = rule.conclusion
    if rule.main is None:
        for choice, premises in applications(rule, goal):
            yield (), choice, premises
        return
    mside = rule.main[0]
    main_pat = conc.get(rule.main)
    share = {"L": calc.has_contraction("L"), "R": calc.has_contraction("R")}
    goal_terms = goal.left if mside == "L" else goal.right
    out = []
    seen_main = set()
    for occ_i, gterm in enumerate(goal_terms):
        mk = term_key(gterm)
        if mk in seen_main:
            continue
        seen_main.add(mk)
        sub0 = unify(main_pat, gterm, {})
        if sub0 is None:
            continue
        items = [("L", t) for i, t in enumerate(goal.left)
                 if not (mside == "L" and i == occ_i)]
        items += [("R", t) for i, t in enumerate(goal.right)
                  if not (mside == "R" and i == occ_i)]
        # pass-through conclusion terms consume one item of their side
        passthrough = []
        for s in ("L", "R"):
            terms, _ = conc.side(s)
            for i, t in enumerate(terms):
                if (s, i) != rule.main:
                    passthrough.append((s, t))

        def bind(idx, sub, items):
            if idx == len(passthrough):
                yield sub, items
                return
            s, t = passthrough[idx]
            seen = set()
            for i, (si, f) in enumerate(items):
                if si != s:
                    continue
                key = term_key(f)
                if key in seen:
                    continue
                seen.add(key)
                s2 = unify(t, f, sub)
                if s2 is not None:
                    yield from bind(idx + 1, s2, items[:i] + items[i + 1:])

        lslots = conc.left_vars
        rslots = conc.right_vars
        for sub, rest in bind(0, sub0, items):
            if any(s == "L" for s, _ in rest) and not lslots:
                continue
            if any(s == "R" for s, _ in rest) and not rslots:
                continue
            fmap = {name: resolve(MVar(name), sub) for name in sub}
            main_inst = subst_term(main_pat, fmap)
            opts = []
            for s, f in rest:
                slots = lslots if s == "L" else rslots
                o = [frozenset([k]) for k in range(len(slots))]
                if share[s] and len(slots) >= 2:
                    for size in range(2, len(slots) + 1):
                        o.extend(frozenset(c) for c in
                                 itertools.combinations(range(len(slots)), size))
                opts.append(o)
            # retention of the main formula into premise slots
            mslots = lslots if mside == "L" else rslots
            ret_opts = [frozenset()]
            if share[mside] and mslots:
                for size in range(1, len(mslots) + 1):
                    ret_opts.extend(frozenset(c) for c in
                                    itertools.combinations(range(len(mslots)), size))
            for vec in itertools.product(*opts):
                for ret in ret_opts:
                    content: dict[str, list] = {v: [] for v in lslots + rslots}
                    extras = []
                    for (s, f), sel in zip(rest, vec):
                        slots = lslots if s == "L" else rslots
                        for k in sel:
                            content[slots[k]].append(f)
                        extras.extend((s, f) for _ in range(len(sel) - 1))
                    for k in ret:
                        content[mslots[k]].append(main_inst)
                    extras.extend((mside, main_inst) for _ in range(len(ret)))
                    cmap = {v: Fragment.make(ts, ())
                            for v, ts in content.items()}
                    full = Substitution.make(fmap, cmap)
                    expanded = _expand_goal(goal, extras)
                    exp_terms = expanded.left if mside == "L" else expanded.right
                    exp_occ = (mside, exp_terms.index(main_inst))
                    for vi, prems in enumerate(rule.variants):
                        choice = RuleChoice(rule.name, vi, exp_occ, full)
                        premises = tuple(
                            apply_subst(p, full).to_sequent() for p in prems)
                        out.append((tuple(sorted(extras,
                                                 key=lambda x: (x[0], term_key(x[1])))),
                                    choice, premises))
    # deterministic order, strict applications first; drop duplicates
    seen = set()
    out.sort(key=lambda ecp: (len(ecp[0]), str(ecp[1].subst), ecp[1].variant))
    for extras, choice, premises in out:
        key = (extras, premises, choice.variant)
        if key not in seen:
            seen.add(key)
            yield extras, choice, premises


def _init_with_weakening(calc, goal, atom) -> Derivation:
    target = Sequent.make([atom], [atom])
    if goal == target:
        rule = calc.rule("init")
        for choice, _ in applications(rule, goal):
            return Derivation(goal, choice, ())
        raise AssertionError("initial rule did not apply")
    for side, zone, wname in (("L", goal.left, "w_l"), ("R", goal.right, "w_r")):
        extras = [t for t in zone if t != atom] or \
                 ([atom] if zone.count(atom) > 1 else [])
        if extras:
            t = extras[0]
            lst = list(zone)
            lst.remove(t)
            if side == "L":
                smaller = Sequent.make(lst, goal.right)
            else:
                smaller = Sequent.make(goal.left, lst)
            child = _init_with_weakening(calc, smaller, atom)
            rule = calc.rule(wname)
            for choice, prems in applications(rule, goal):
                if prems == (child.root,):
                    return Derivation(goal, choice, (child,))
            raise AssertionError(f"{wname} did not apply")
    raise AssertionError("no reduction to initial")


def prove(calc: CalculusSpec, s: Sequent, b: SearchBounds) -> SearchOutcome:
    """Backward proof search in the base calculus."""
    return _BaseSearch(calc, b).prove(s)


# ---------------------------------------------------------------------------
# Focused search
# ---------------------------------------------------------------------------

class _FocusedSearch:
    def __init__(self, fc: FocusedCalculus, bounds: SearchBounds):
        self.fc = fc
        self.bounds = bounds
        self.stats = SearchStats()
        self.failed: set[FSeq] = set()
        self.has_contraction = any(r.is_contraction() for r in fc.base.rules)

    def prove(self, fs: FSeq) -> SearchOutcome:
        result, bound_hit, _ = self._visit(fs, 0, (), {})
        if result is not None:
            return SearchOutcome(PROVED, result, self.stats.nodes,
                                 self.stats.max_depth_reached)
        status = BOUND_HIT if bound_hit else REFUTED
        return SearchOutcome(status, None, self.stats.nodes,
                             self.stats.max_depth_reached)

    def _visit(self, fs: FSeq, depth, ancestors, copies):
        self.stats.nodes += 1
        self.stats.max_depth_reached = max(self.stats.max_depth_reached, depth)
        if self.stats.nodes > self.bounds.max_nodes or \
                depth >= self.bounds.max_depth:
            return None, True, False
        if fs in self.failed:
            return None, False, False
        if fs.label == NEUTRAL_LABEL:
            if self.has_contraction and fs in ancestors:
                return None, False, True
            return self._neutral(fs, depth, ancestors, copies)
        return self._phase(fs, depth, ancestors, copies)

    def _neutral(self, fs, depth, ancestors, copies):
        init = initial_close(self.fc, fs)
        if init is not None:
            return FNode(fs, init, ()), False, False
        bound_hit = False
        tainted = False
        for step, child in selections(self.fc, fs):
            copy = step[2]
            new_copies = copies
            if copy:
                key = (step[0], step[1])
                used = copies.get(key, 0)
                if used >= self.bounds.allow_contraction_copies:
                    bound_hit = True
                    continue
                new_copies = dict(copies)
                new_copies[key] = used + 1
            sub, bh, tn = self._visit(child, depth + 1, ancestors + (fs,),
                                      new_copies)
            bound_hit = bound_hit or bh
            tainted = tainted or tn
            if sub is not None:
                return FNode(fs, step, (sub,)), bound_hit, tainted
        if not bound_hit and not tainted:
            self.failed.add(fs)
        return None, bound_hit, tainted

    def _phase(self, fs, depth, ancestors, copies):
        init = initial_close(self.fc, fs)
        if init is not None:
            return FNode(fs, init, ()), False, False
        for mv in (end_move(fs), store_move(self.fc, fs)):
            if mv is None:
                continue
            step, child = mv
            sub, bh, tn = self._visit(child, depth + 1, ancestors, copies)
            if sub is not None:
                return FNode(fs, step, (sub,)), bh, tn
            if not bh and not tn:
                self.failed.add(fs)
            return None, bh, tn
        # all active formulas now carry the phase's own polarity: decompose
        # the first one, in canonical order
        want = NEGATIVE if fs.label == NEG_LABEL else POSITIVE
        focus = None
        for s, zone in (("L", fs.al), ("R", fs.ar)):
            for f in zone:
                if isinstance(f, App) and self.fc.polarity(f, s) == want:
                    focus = (s, f)
                    break
            if focus:
                break
        if focus is None:
            self.failed.add(fs)
            return None, False, False
        s, f = focus
        bound_hit = False
        tainted = False
        for step, premises in lifted_applications(self.fc, fs, s, f):
            copied = step[3]
            new_copies = copies
            if copied:
                over = False
                new_copies = dict(copies)
                for cs, ca in copied:
                    key = ("split", cs, ca)
                    new_copies[key] = new_copies.get(key, 0) + 1
                    if new_copies[key] > self.bounds.allow_contraction_copies:
                        over = True
                if over:
                    bound_hit = True
                    continue
            subders = []
            ok = True
            for p in premises:
                sub, bh, tn = self._visit(p, depth + 1, ancestors, new_copies)
                bound_hit = bound_hit or bh
                tainted = tainted or tn
                if sub is None:
                    ok = False
                    break
                subders.append(sub)
            if ok:
                return FNode(fs, step, tuple(subders)), bound_hit, tainted
        if not bound_hit and not tainted:
            self.failed.add(fs)
        return None, bound_hit, tainted


def focused_bounds(b: SearchBounds) -> SearchBounds:
    """Bounds for the focused run, widened for structural overhead (every
    logical step costs an extra selection/store/end envelope)."""
    return SearchBounds(max_depth=6 * b.max_depth + 12,
                        max_nodes=4 * b.max_nodes,
                        allow_contraction_copies=b.allow_contraction_copies)


def prove_focused(fc: FocusedCalculus, s: Sequent, b: SearchBounds) -> SearchOutcome:
    """Phase-disciplined backward search; the goal is lifted to a neutral
    focused sequent with all formulas passive."""
    return _FocusedSearch(fc, focused_bounds(b)).prove(FSeq.neutral(s))


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusParams:
    connectives: tuple[str, ...]
    atom_count: int = 3
    max_depth: int = 3
    left_size: tuple[int, int] = (0, 2)
    right_size: tuple[int, int] = (1, 2)
    count: int = 200
    seed: int = 42


class _SplitMix:
    """Tiny deterministic PRNG so corpora are identical on every platform."""

    def __init__(self, seed: int):
        self.state = seed & 0xFFFFFFFFFFFFFFFF

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return self.next() % n


def gen_corpus(calc: CalculusSpec, p: CorpusParams) -> list[Sequent]:
    """Seeded random sequents; uniform choice over connectives and atoms at
    each formula node, sides sized within the given ranges."""
    rng = _SplitMix(p.seed)
    atoms = [Atom(chr(ord("a") + i)) for i in range(p.atom_count)]
    conns = [calc.connective(c) for c in p.connectives]

    def formula(depth: int) -> Term:
        choices = len(atoms) + (len(conns) if depth > 0 else 0)
        k = rng.below(choices)
        if k < len(atoms):
            return atoms[k]
        decl = conns[k - len(atoms)]
        return App(decl.name, tuple(formula(depth - 1)
                                    for _ in range(decl.arity)))

    lo_l, hi_l = p.left_size
    lo_r, hi_r = p.right_size
    if calc.succedent_arity == "single":
        lo_r = hi_r = 1
    out = []
    for _ in range(p.count):
        nl = lo_l + rng.below(hi_l - lo_l + 1)
        nr = lo_r + rng.below(hi_r - lo_r + 1)
        out.append(Sequent.make([formula(p.max_depth) for _ in range(nl)],
                                [formula(p.max_depth) for _ in range(nr)]))
    return out


# ---------------------------------------------------------------------------
# Cross-validation harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationRow:
    sequent: Sequent
    base: str
    focused: str
    base_nodes: int
    focused_nodes: int

    def decided(self) -> bool:
        return BOUND_HIT not in (self.base, self.focused)

    def mismatch(self) -> bool:
        return self.decided() and self.base != self.focused


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ValidationRow, ...]

    def mismatches(self) -> tuple[ValidationRow, ...]:
        return tuple(r for r in self.rows if r.mismatch())

    def bound_hits(self) -> tuple[ValidationRow, ...]:
        return tuple(r for r in self.rows if not r.decided())

    def agreements(self) -> int:
        return sum(1 for r in self.rows if r.decided() and not r.mismatch())

    def node_ratio_wins(self) -> int:
        """Sequents where the focused search expanded no more nodes."""
        return sum(1 for r in self.rows if r.focused_nodes <= r.base_nodes)


def cross_validate(calc: CalculusSpec, fc: FocusedCalculus,
                   corpus: list[Sequent], b: SearchBounds) -> ValidationReport:
    """Run both provers on every sequent.  Every focused proof is erased and
    revalidated in the base calculus; an erasure failure is a hard error."""
    rows = []
    for s in corpus:
        base = prove(calc, s, b)
        if base.proved():
            issue = validate_derivation(calc, base.derivation)
            if issue is not None:
                raise AssertionError(f"base proof of {s} invalid: {issue}")
        foc = prove_focused(fc, s, b)
        if foc.proved():
            issue = validate_focused(fc, foc.derivation)
            if issue is not None:
                raise AssertionError(f"focused proof of {s} invalid: {issue}")
            erased = erase_focus(fc, foc.derivation)
            if erased.root != s:
                raise AssertionError(f"erasure changed the end sequent of {s}")
        rows.append(ValidationRow(s, base.status, foc.status,
                                  base.nodes, foc.nodes))
    return ValidationReport(tuple(rows))
