"""Generation of focused proof systems from a focusable bipartition.

A focused sequent has passive and active zones on both sides plus a phase
label:  ``Gamma ; Lambda |-p Delta ; Pi`` with ``p`` one of ``0``, ``-``,
``+``.  Five structural rules connect the phases: two selection rules that
move a formula into an active zone and open a phase, two store rules that
park wrong-polarity formulas back into the passive zones, and the end rule
that closes a phase once the active zones are empty.  Lifted logical rules
act only on active occurrences.

Atoms are neutral: never selectable, storable in either phase.  The base
initial rule is lifted to close a positive phase whose active formula is an
atom with its dual stored passively, and to close a neutral sequent whose
two sides share a passive atom; remaining context must be weakenable.

Contraction is realized as an optional copy when selecting a positive
formula (on sides whose base calculus has contraction and whose positive
phase is not contraction-admissible) and by allowing passive atoms to be
shared between the premises of context-splitting rules.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .graph import ConditionReport, FocusableBipartition, check_conditions
from .kernel import (
    App, Atom, CalculusSpec, Derivation, Fragment, MVar, RuleSchema, Sequent,
    SeqPattern, Substitution, Term, applications, mset, subst_term, term_key,
    unify, resolve, validate_derivation,
    CONTRACTION_LEFT, CONTRACTION_RIGHT, INITIAL,
)
from .permcheck import (
    Budget, NotApplicableError, contraction_permutes_up_c, permutes_up,
)
from . import dsl

NEGATIVE = "negative"
POSITIVE = "positive"
NEUTRAL_ATOM = "neutral-atom"

NEUTRAL_LABEL = "0"
NEG_LABEL = "-"
POS_LABEL = "+"


class FocusgenError(Exception):
    pass


class NoIntroductionRule(FocusgenError):
    pass


class AmbiguousIntroduction(FocusgenError):
    pass


# ---------------------------------------------------------------------------
# Polarity
# ---------------------------------------------------------------------------

def intro_rules(calc: CalculusSpec, conn: str, side: str) -> list[RuleSchema]:
    out = []
    for r in calc.logical_rules():
        if r.main_side() != side:
            continue
        main = r.main_term()
        if isinstance(main, App) and main.conn == conn:
            out.append(r)
    return out


def polarity_of(calc: CalculusSpec, f: Term, side: str,
                bp: FocusableBipartition) -> str:
    """Polarity of a formula occurrence, determined by the component of its
    introduction rule on that side; atoms are neutral."""
    if isinstance(f, Atom):
        return NEUTRAL_ATOM
    if isinstance(f, MVar):
        raise FocusgenError("polarity of a metavariable is undefined")
    rules = intro_rules(calc, f.conn, side)
    if not rules:
        raise NoIntroductionRule(f"no introduction rule for {f.conn} on {side}")
    comps = {NEGATIVE if r.name in bp.negative else
             POSITIVE if r.name in bp.positive else None for r in rules}
    if len(comps) != 1 or None in comps:
        raise AmbiguousIntroduction(
            f"{f.conn} on {side} has introduction rules in several components")
    return comps.pop()


# ---------------------------------------------------------------------------
# Contraction-phase analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseContraction:
    phase: str  # "negative" | "positive"
    admissible: bool
    failures: tuple[tuple[str, str, str], ...]  # (contraction, rule, check)


@dataclass(frozen=True)
class ContractionReport:
    trivially_admissible: bool
    phases: tuple[PhaseContraction, ...]

    def phase(self, name: str) -> PhaseContraction:
        for p in self.phases:
            if p.phase == name:
                return p
        raise KeyError(name)

    def positive_needs_contraction(self) -> bool:
        if self.trivially_admissible:
            return False
        return not self.phase(POSITIVE).admissible


def contraction_phase_admissibility(calc: CalculusSpec, bp: FocusableBipartition,
                                    budget: Optional[Budget] = None) -> ContractionReport:
    """Per-phase contraction admissibility: a phase admits elimination of
    contraction on its main formulas when contraction permutes up (both
    plainly and onto auxiliaries) every rule of the phase's component."""
    contractions = calc.contraction_rules()
    if not contractions:
        return ContractionReport(trivially_admissible=True, phases=(
            PhaseContraction(NEGATIVE, True, ()),
            PhaseContraction(POSITIVE, True, ())))
    phases = []
    for phase, comp in ((NEGATIVE, bp.negative), (POSITIVE, bp.positive)):
        failures = []
        for c in contractions:
            for name in comp:
                alpha = calc.rule(name)
                if not permutes_up(c, alpha, calc, budget).holds_edge():
                    failures.append((c.name, name, "up"))
                try:
                    res = contraction_permutes_up_c(c, alpha, calc, budget)
                    if not res.holds_edge():
                        failures.append((c.name, name, "up_c"))
                except NotApplicableError:
                    pass
        phases.append(PhaseContraction(phase, not failures,
                                       tuple(sorted(failures))))
    return ContractionReport(trivially_admissible=False, phases=tuple(phases))


# ---------------------------------------------------------------------------
# Focused calculus
# ---------------------------------------------------------------------------

STRUCTURAL_RULES = ("sel_l", "sel_r", "st_l", "st_r", "end")


@dataclass(frozen=True)
class FocusedCalculus:
    name: str
    base: CalculusSpec
    bipartition: FocusableBipartition
    contraction: ContractionReport
    copy_on_select_left: bool
    copy_on_select_right: bool
    intro: tuple[tuple[tuple[str, str], str], ...]  # (conn, side) -> rule name

    def intro_rule(self, conn: str, side: str) -> RuleSchema:
        for key, rn in self.intro:
            if key == (conn, side):
                return self.base.rule(rn)
        raise NoIntroductionRule(f"no introduction rule for {conn} on {side}")

    def polarity(self, f: Term, side: str) -> str:
        if isinstance(f, Atom):
            return NEUTRAL_ATOM
        rn = self.intro_rule(f.conn, side).name
        return NEGATIVE if rn in self.bipartition.negative else POSITIVE

    def copy_on_select(self, side: str) -> bool:
        return self.copy_on_select_left if side == "L" else self.copy_on_select_right

    def weakenable(self, side: str) -> bool:
        return self.base.has_weakening(side)

    def atom_sharing(self, side: str) -> bool:
        return self.base.has_contraction(side)


def generate_focused(calc: CalculusSpec, bp: FocusableBipartition,
                     report: Optional[ContractionReport] = None,
                     budget: Optional[Budget] = None) -> FocusedCalculus:
    """Build the focused system for a validated focusable bipartition."""
    _reverify(calc, bp, budget)
    intro: dict[tuple[str, str], str] = {}
    for r in calc.logical_rules():
        main = r.main_term()
        if not isinstance(main, App):
            raise FocusgenError(f"rule {r.name} has a non-compound main formula")
        key = (main.conn, r.main_side())
        if key in intro and intro[key] != r.name:
            raise AmbiguousIntroduction(
                f"{key[0]} on {key[1]} is introduced by both {intro[key]} and "
                f"{r.name}; occurrence polarity would be ambiguous")
        intro[key] = r.name
    if report is None:
        report = contraction_phase_admissibility(calc, bp, budget)
    needs_copy = report.positive_needs_contraction()
    return FocusedCalculus(
        name=calc.name + "f",
        base=calc,
        bipartition=bp,
        contraction=report,
        copy_on_select_left=needs_copy and calc.has_contraction("L"),
        copy_on_select_right=needs_copy and calc.has_contraction("R"),
        intro=tuple(sorted(intro.items())))


def _reverify(calc: CalculusSpec, bp: FocusableBipartition,
              budget: Optional[Budget]) -> None:
    logical = {r.name for r in calc.logical_rules()}
    neg, pos = set(bp.negative), set(bp.positive)
    if not neg or not pos or neg & pos or neg | pos != logical:
        raise FocusgenError("bipartition must split the logical rules in two")
    conds = check_conditions(calc, bp.positive)
    bad = [c.rule for c in conds if not c.ok()]
    if bad:
        raise FocusgenError(f"positive component violates conditions: {bad}")
    for comp in (bp.negative, bp.positive):
        for a, b in itertools.combinations(sorted(comp), 2):
            for x, y in ((a, b), (b, a)):
                if not permutes_up(calc.rule(x), calc.rule(y), calc,
                                   budget).holds_edge():
                    raise FocusgenError(
                        f"component not internally permutable: {x} vs {y}")
    for b in sorted(pos):
        for a in sorted(neg):
            if not permutes_up(calc.rule(b), calc.rule(a), calc,
                               budget).holds_edge():
                raise FocusgenError(
                    f"hierarchy violated: {b} does not permute up {a}")


# ---------------------------------------------------------------------------
# Focused sequents and derivations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FSeq:
    """Focused sequent: passive/active zones per side plus a phase label."""
    pl: tuple[Term, ...]
    al: tuple[Term, ...]
    pr: tuple[Term, ...]
    ar: tuple[Term, ...]
    label: str

    @staticmethod
    def make(pl, al, pr, ar, label) -> "FSeq":
        return FSeq(mset(pl), mset(al), mset(pr), mset(ar), label)

    @staticmethod
    def neutral(s: Sequent) -> "FSeq":
        return FSeq(s.left, (), s.right, (), NEUTRAL_LABEL)

    def erase(self) -> Sequent:
        return Sequent.make(self.pl + self.al, self.pr + self.ar)

    def actives(self) -> tuple[tuple[str, Term], ...]:
        return tuple(("L", t) for t in self.al) + tuple(("R", t) for t in self.ar)

    def __str__(self) -> str:
        def z(ts):
            return ", ".join(str(t) for t in ts) if ts else "."
        return f"{z(self.pl)} ; {z(self.al)} |-{self.label} {z(self.pr)} ; {z(self.ar)}"


@dataclass(frozen=True)
class FNode:
    """Focused derivation node; ``step`` records the rule instance."""
    seq: FSeq
    step: tuple
    children: tuple["FNode", ...]

    def count_nodes(self) -> int:
        return 1 + sum(c.count_nodes() for c in self.children)

    def count_logical(self) -> int:
        own = 1 if self.step[0] == "rule" else 0
        return own + sum(c.count_logical() for c in self.children)


def _remove_one(terms: tuple[Term, ...], t: Term) -> tuple[Term, ...]:
    lst = list(terms)
    lst.remove(t)
    return tuple(lst)


# ---------------------------------------------------------------------------
# Focused rule application
# ---------------------------------------------------------------------------
#
# Items carry their zone status so premises inherit it: the auxiliary
# formulas of the applied rule become active, everything else keeps its
# passive/active standing.

SItem = tuple[str, Term]  # ("P", f) passive | ("A", f) active


def lifted_applications(fc: FocusedCalculus, fs: FSeq, side: str, focus: Term):
    """All ways to apply the introduction rule of ``focus`` (an active
    formula on ``side``) inside the current phase.  Yields (step, premises)
    pairs; the step records copied atoms for erasure."""
    rule = fc.intro_rule(focus.conn, side)
    out = []
    for variant in range(len(rule.variants)):
        out.extend(_lift_variant(fc, fs, side, focus, rule, variant))
    return out


def _lift_variant(fc, fs, side, focus, rule, variant):
    sub = unify(rule.conclusion.get(rule.main), focus, {})
    if sub is None:
        return []
    conc = rule.conclusion

    def zone_items(s: str) -> list[SItem]:
        if s == "L":
            items = [("P", t) for t in fs.pl] + [("A", t) for t in fs.al]
        else:
            items = [("P", t) for t in fs.pr] + [("A", t) for t in fs.ar]
        if s == side:
            items.remove(("A", focus))
        return items

    litems = zone_items("L")
    ritems = zone_items("R")

    # pass-through conclusion terms (single-succedent succedents) consume an
    # item of their side, keeping its status
    passthrough: list[tuple[str, Term]] = []
    for s, terms in (("L", conc.left), ("R", conc.right)):
        for i, t in enumerate(terms):
            if (s, i) != rule.main:
                passthrough.append((s, t))

    results = []

    def bind_passthrough(idx, sub, litems, ritems, consumed):
        if idx == len(passthrough):
            results.extend(_distribute(fc, fs, rule, variant, sub,
                                       litems, ritems, consumed))
            return
        s, t = passthrough[idx]
        items = litems if s == "L" else ritems
        seen = set()
        for i, (st, f) in enumerate(items):
            key = (st, term_key(f))
            if key in seen:
                continue
            seen.add(key)
            s2 = unify(t, f, sub)
            if s2 is None:
                continue
            rest = items[:i] + items[i + 1:]
            nl, nr = (rest, ritems) if s == "L" else (litems, rest)
            bind_passthrough(idx + 1, s2, nl, nr,
                             consumed + [(s, t, st, f)])

    bind_passthrough(0, sub, litems, ritems, [])
    return results


def _distribute(fc, fs, rule, variant, sub, litems, ritems, consumed):
    conc = rule.conclusion
    prems = rule.variants[variant]
    n = len(prems)
    fmap = {name: resolve(MVar(name), sub) for name in sub}

    def var_slots(s: str):
        return conc.side(s)[1]

    def options_for(item: SItem, slots, s: str):
        m = len(slots)
        opts = [frozenset([k]) for k in range(m)]
        st, f = item
        # passive atoms and positives may be shared between the premises of
        # a splitting rule when the base calculus has contraction there;
        # passive negatives cannot occur at a positive-phase split
        sharable = isinstance(f, Atom) or fc.polarity(f, s) == POSITIVE
        if m >= 2 and st == "P" and sharable and fc.atom_sharing(s):
            for size in range(2, m + 1):
                for combo in itertools.combinations(range(m), size):
                    opts.append(frozenset(combo))
        return opts

    out = []
    lslots, rslots = var_slots("L"), var_slots("R")
    if (not lslots and litems) or (not rslots and ritems):
        return []
    l_choices = [options_for(it, lslots, "L") for it in litems]
    r_choices = [options_for(it, rslots, "R") for it in ritems]
    for lvec in itertools.product(*l_choices):
        for rvec in itertools.product(*r_choices):
            content: dict[str, list[SItem]] = {v: [] for v in lslots + rslots}
            copied: list[tuple[str, Term]] = []
            for (item, sel), s, slots in (
                    [(p, "L", lslots) for p in zip(litems, lvec)] +
                    [(p, "R", rslots) for p in zip(ritems, rvec)]):
                for k in sel:
                    content[slots[k]].append(item)
                for _ in range(len(sel) - 1):
                    copied.append((s, item[1]))
            premises = []
            for pi, p in enumerate(prems):
                zones = {("L", "P"): [], ("L", "A"): [],
                         ("R", "P"): [], ("R", "A"): []}
                aux = set(rule.aux_indices(variant, pi))
                for s, terms in (("L", p.left), ("R", p.right)):
                    for i, t in enumerate(terms):
                        inst = subst_term(t, fmap)
                        status = "A" if (s, i) in aux else _consumed_status(
                            consumed, s, t)
                        zones[(s, status)].append(inst)
                for s, vars_ in (("L", p.left_vars), ("R", p.right_vars)):
                    for v in vars_:
                        for st, f in content[v]:
                            zones[(s, st)].append(f)
                premises.append(FSeq.make(zones[("L", "P")], zones[("L", "A")],
                                          zones[("R", "P")], zones[("R", "A")],
                                          fs.label))
            step = ("rule", rule.name, variant, tuple(sorted(
                copied, key=lambda x: (x[0], term_key(x[1])))))
            out.append((step, tuple(premises)))
    # deduplicate identical premise tuples
    seen = set()
    uniq = []
    for step, premises in out:
        key = (step, premises)
        if key not in seen:
            seen.add(key)
            uniq.append((step, premises))
    return uniq


def _consumed_status(consumed, s, t) -> str:
    for cs, ct, st, _ in consumed:
        if cs == s and ct == t:
            return st
    return "P"


# ---------------------------------------------------------------------------
# Structural moves
# ---------------------------------------------------------------------------

def initial_close(fc: FocusedCalculus, fs: FSeq) -> Optional[tuple]:
    """Lifted initial: closes a neutral sequent on a shared passive atom, or
    a positive phase whose active formula is an atom with a stored dual.
    Any remaining context must be weakenable."""
    if not any(r.kind == INITIAL for r in fc.base.rules):
        return None

    def leftover_ok(extra_l: int, extra_r: int) -> bool:
        return (extra_l == 0 or fc.weakenable("L")) and \
               (extra_r == 0 or fc.weakenable("R"))

    if fs.label == NEUTRAL_LABEL:
        shared = sorted(set(fs.pl) & set(fs.pr), key=term_key)
        for a in shared:
            if isinstance(a, Atom) and leftover_ok(len(fs.pl) - 1,
                                                   len(fs.pr) - 1):
                return ("init", a)
        return None
    if fs.label == POS_LABEL:
        if len(fs.al) + len(fs.ar) != 1:
            return None
        if fs.al:
            a = fs.al[0]
            if isinstance(a, Atom) and a in fs.pr and \
                    leftover_ok(len(fs.pl), len(fs.pr) - 1):
                return ("init", a)
        else:
            a = fs.ar[0]
            if isinstance(a, Atom) and a in fs.pl and \
                    leftover_ok(len(fs.pl) - 1, len(fs.pr)):
                return ("init", a)
    return None


def selections(fc: FocusedCalculus, fs: FSeq):
    """Selection moves available at a neutral sequent, in deterministic
    order.  Selecting a positive formula is blocked by any passive negative
    compound; atoms are never selected.  Copies realize contraction."""
    assert fs.label == NEUTRAL_LABEL
    has_negative = any(
        isinstance(f, App) and fc.polarity(f, s) == NEGATIVE
        for s, zone in (("L", fs.pl), ("R", fs.pr)) for f in zone)
    out = []
    for s, zone in (("L", fs.pl), ("R", fs.pr)):
        sel = "sel_l" if s == "L" else "sel_r"
        seen = set()
        for f in zone:
            if term_key(f) in seen or not isinstance(f, App):
                continue
            seen.add(term_key(f))
            pol = fc.polarity(f, s)
            if pol == NEGATIVE:
                label = NEG_LABEL
                copies = (False,)
            elif pol == POSITIVE and not has_negative:
                label = POS_LABEL
                copies = (False, True) if fc.copy_on_select(s) else (False,)
            else:
                continue
            for copy in copies:
                passive = zone if copy else _remove_one(zone, f)
                if s == "L":
                    child = FSeq.make(passive, (f,), fs.pr, (), label)
                else:
                    child = FSeq.make(fs.pl, (), passive, (f,), label)
                out.append(((sel, f, copy), child))
    return out


def store_move(fc: FocusedCalculus, fs: FSeq) -> Optional[tuple]:
    """First storable active occurrence (left before right, canonical
    order): a wrong-polarity formula or an atom."""
    for s, zone in (("L", fs.al), ("R", fs.ar)):
        for f in zone:
            pol = fc.polarity(f, s)
            wrong = (fs.label == POS_LABEL and pol == NEGATIVE) or \
                    (fs.label == NEG_LABEL and pol == POSITIVE)
            if wrong or pol == NEUTRAL_ATOM:
                st = "st_l" if s == "L" else "st_r"
                if s == "L":
                    child = FSeq.make(fs.pl + (f,), _remove_one(fs.al, f),
                                      fs.pr, fs.ar, fs.label)
                else:
                    child = FSeq.make(fs.pl, fs.al,
                                      fs.pr + (f,), _remove_one(fs.ar, f),
                                      fs.label)
                return ((st, f), child)
    return None


def end_move(fs: FSeq) -> Optional[tuple]:
    if fs.label in (NEG_LABEL, POS_LABEL) and not fs.al and not fs.ar:
        return (("end",), FSeq.make(fs.pl, (), fs.pr, (), NEUTRAL_LABEL))
    return None


# ---------------------------------------------------------------------------
# Focused derivation validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FocusIssue:
    path: tuple[int, ...]
    reason: str

    def __str__(self) -> str:
        return f"at node {'/'.join(map(str, self.path)) or 'root'}: {self.reason}"


def validate_focused(fc: FocusedCalculus, d: FNode) -> Optional[FocusIssue]:
    """Replay every step and enforce the phase discipline."""
    return _validate_fnode(fc, d, ())


def _validate_fnode(fc, d, path):
    fs = d.seq
    if fs.label == NEUTRAL_LABEL and (fs.al or fs.ar):
        return FocusIssue(path, "neutral sequent with non-empty active zone")
    kind = d.step[0]
    expected: Optional[tuple] = None
    if kind == "init":
        if initial_close(fc, fs) is None:
            return FocusIssue(path, "initial close not available")
        if d.children:
            return FocusIssue(path, "initial node with children")
        return None
    if kind in ("sel_l", "sel_r"):
        if fs.label != NEUTRAL_LABEL:
            return FocusIssue(path, "selection outside a neutral sequent")
        for step, child in selections(fc, fs):
            if step == d.step:
                expected = (child,)
                break
        if expected is None:
            return FocusIssue(path, f"illegal selection {d.step}")
    elif kind in ("st_l", "st_r"):
        mv = store_move(fc, fs)
        if mv is None or mv[0] != d.step:
            return FocusIssue(path, f"illegal store {d.step}")
        expected = (mv[1],)
    elif kind == "end":
        mv = end_move(fs)
        if mv is None:
            return FocusIssue(path, "end with non-empty active zones")
        expected = (mv[1],)
    elif kind == "rule":
        if fs.label not in (NEG_LABEL, POS_LABEL):
            return FocusIssue(path, "phase rule outside a phase")
        found = None
        for s, zone in (("L", fs.al), ("R", fs.ar)):
            for f in zone:
                if not isinstance(f, App):
                    continue
                try:
                    rule = fc.intro_rule(f.conn, s)
                except NoIntroductionRule:
                    continue
                if rule.name != d.step[1]:
                    continue
                pol = fc.polarity(f, s)
                want = NEGATIVE if fs.label == NEG_LABEL else POSITIVE
                if pol != want:
                    continue
                for step, premises in lifted_applications(fc, fs, s, f):
                    if step == d.step and \
                            premises == tuple(c.seq for c in d.children):
                        found = premises
                        break
                if found:
                    break
            if found:
                break
        if found is None:
            return FocusIssue(path, f"phase rule {d.step[1]} does not replay")
        expected = found
    else:
        return FocusIssue(path, f"unknown step {kind}")
    if expected is not None:
        got = tuple(c.seq for c in d.children)
        if got != tuple(expected):
            return FocusIssue(path, "children do not match the step")
    for i, c in enumerate(d.children):
        issue = _validate_fnode(fc, c, path + (i,))
        if issue is not None:
            return issue
    return None


# ---------------------------------------------------------------------------
# Erasure back to the base calculus
# ---------------------------------------------------------------------------

def erase_focus(fc: FocusedCalculus, d: FNode) -> Derivation:
    """Strip the focusing structure: selection/store/end nodes disappear,
    selection copies become contraction steps, shared atoms contract, and
    the lifted initial unfolds into weakening steps plus the base initial."""
    base = fc.base
    der = _erase_node(fc, d)
    issue = validate_derivation(base, der)
    if issue is not None:
        raise FocusgenError(f"erasure failed validation: {issue}")
    return der


def _erase_node(fc: FocusedCalculus, d: FNode) -> Derivation:
    base = fc.base
    kind = d.step[0]
    root = d.seq.erase()
    if kind in ("st_l", "st_r", "end"):
        return _erase_node(fc, d.children[0])
    if kind in ("sel_l", "sel_r"):
        _, f, copy = d.step
        child = _erase_node(fc, d.children[0])
        if not copy:
            return child
        cname = "c_l" if kind == "sel_l" else "c_r"
        return _structural_node(base, cname, root, child)
    if kind == "init":
        return _init_chain(base, root, d.step[1])
    if kind == "rule":
        _, rname, _, copied = d.step
        children = tuple(_erase_node(fc, c) for c in d.children)
        cur = root
        for s, a in copied:
            cur = Sequent.make(cur.left + ((a,) if s == "L" else ()),
                               cur.right + ((a,) if s == "R" else ()))
        node = _base_node(base, rname, cur, children)
        for s, a in reversed(copied):
            below = Sequent.make(
                _remove_one(node.root.left, a) if s == "L" else node.root.left,
                _remove_one(node.root.right, a) if s == "R" else node.root.right)
            node = _structural_node(base, "c_l" if s == "L" else "c_r",
                                    below, node)
        return node
    raise FocusgenError(f"cannot erase step {kind}")


def _base_node(base: CalculusSpec, rule_name: str, root: Sequent,
               children: tuple[Derivation, ...]) -> Derivation:
    rule = base.rule(rule_name)
    expected = tuple(c.root for c in children)
    for choice, prems in applications(rule, root):
        if prems == expected:
            return Derivation(root, choice, children)
    raise FocusgenError(
        f"no application of {rule_name} at {root} yields the children")


def _structural_node(base, rule_name, root, child) -> Derivation:
    return _base_node(base, rule_name, root, (child,))


def _init_chain(base: CalculusSpec, s: Sequent, atom: Term) -> Derivation:
    target = Sequent.make([atom], [atom])
    if s == target:
        return _base_node(base, "init", s, ())
    for side, zone, wname in (("L", s.left, "w_l"), ("R", s.right, "w_r")):
        extras = [t for t in zone if t != atom] or \
                 ([atom] if zone.count(atom) > 1 else [])
        if extras:
            t = extras[0]
            smaller = Sequent.make(
                _remove_one(s.left, t) if side == "L" else s.left,
                _remove_one(s.right, t) if side == "R" else s.right)
            return _structural_node(base, wname, s, _init_chain(base, smaller, atom))
    raise FocusgenError(f"cannot reduce {s} to an initial instance")


# ---------------------------------------------------------------------------
# Printing and parsing of focused calculi
# ---------------------------------------------------------------------------

def render_structural_rules() -> list[str]:
    """The five structural rules in schematic form."""
    return [
        "sel_l:  Gamma ; F |-p Delta ; .   =>   Gamma, F ; . |-0 Delta ; .",
        "sel_r:  Gamma ; . |-p Delta ; F   =>   Gamma ; . |-0 Delta, F ; .",
        "st_l:   Gamma, F ; Lambda |-p Delta ; Pi   =>   Gamma ; Lambda, F |-p Delta ; Pi",
        "st_r:   Gamma ; Lambda |-p Delta, F ; Pi   =>   Gamma ; Lambda |-p Delta ; Pi, F",
        "end:    Gamma ; . |-0 Delta ; .   =>   Gamma ; . |-p Delta ; .",
        "side conditions: selecting negative F sets p = -; selecting positive F",
        "requires no negative formula in Gamma u Delta and sets p = +; store",
        "applies to negative F when p = + and positive F when p = -; atoms are",
        "neutral, storable in either phase, and closed by the lifted initial.",
    ]


def render_focused(fc: FocusedCalculus) -> str:
    """Human-readable listing of the focused system."""
    lines = [f"focused calculus {fc.name} (from {fc.base.name})", ""]
    lines.append("negative phase rules (act on active occurrences, p = -):")
    for n in fc.bipartition.negative:
        lines.append(f"  {n}")
    lines.append("positive phase rules (act on the selected occurrence, p = +):")
    for n in fc.bipartition.positive:
        lines.append(f"  {n}")
    lines.append("structural rules:")
    for l in render_structural_rules():
        lines.append(f"  {l}")
    pol = []
    for (conn, side), rn in fc.intro:
        p = NEGATIVE if rn in fc.bipartition.negative else POSITIVE
        pol.append(f"  {conn} on {side}: {p} (rule {rn})")
    lines.append("polarity table:")
    lines.extend(pol)
    lines.append("contraction policy:")
    if fc.contraction.trivially_admissible:
        lines.append("  base calculus has no contraction; no copies")
    else:
        lines.append(f"  copy on positive selection: left={fc.copy_on_select_left}, "
                     f"right={fc.copy_on_select_right}")
        for ph in fc.contraction.phases:
            status = "admissible" if ph.admissible else \
                "NOT admissible (" + ", ".join(sorted({f[1] for f in ph.failures})) + ")"
            lines.append(f"  contraction in {ph.phase} phase: {status}")
    return "\n".join(lines) + "\n"


def print_focused(fc: FocusedCalculus) -> str:
    """Machine-readable .fclf document (self-contained, reparsable)."""
    lines = [f"focused {fc.name}",
             f"negative: {' '.join(fc.bipartition.negative)}",
             f"positive: {' '.join(fc.bipartition.positive)}",
             f"copy_on_select_left: {str(fc.copy_on_select_left).lower()}",
             f"copy_on_select_right: {str(fc.copy_on_select_right).lower()}"]
    for l in render_focused(fc).splitlines():
        lines.append(f"# {l}" if l else "#")
    lines.append("")
    lines.append(dsl.print_calculus(fc.base).rstrip("\n"))
    return "\n".join(lines) + "\n"


def parse_focused(src: str) -> FocusedCalculus:
    header: dict[str, str] = {}
    base_lines = []
    in_base = False
    for line in src.splitlines():
        if in_base:
            base_lines.append(line)
            continue
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("focused "):
            header["focused"] = stripped.split(None, 1)[1]
            continue
        if stripped.startswith("calculus "):
            in_base = True
            base_lines.append(line)
            continue
        if ":" not in stripped:
            raise FocusgenError(f"bad focused header line: {line!r}")
        key, _, val = stripped.partition(":")
        header[key.strip()] = val.strip()
    if "focused" not in header or "negative" not in header:
        raise FocusgenError("missing focused header")
    base = dsl.parse_calculus("\n".join(base_lines))
    neg = tuple(sorted(header.get("negative", "").split()))
    pos = tuple(sorted(header.get("positive", "").split()))
    bp = FocusableBipartition.make(neg, pos, (), tuple(check_conditions(base, pos)))
    fcal = generate_focused(base, bp)
    want_l = header.get("copy_on_select_left", "").lower() == "true"
    want_r = header.get("copy_on_select_right", "").lower() == "true"
    if (fcal.copy_on_select_left, fcal.copy_on_select_right) != (want_l, want_r):
        raise FocusgenError("recorded contraction policy does not regenerate")
    return fcal
