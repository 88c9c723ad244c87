"""Schema-level rule-permutation checking with replayable witnesses.

The checker decides whether a rule that sits below another in a derivation
can be pushed above it.  It works on one-step interference templates: the
most general two-layer derivation schemas in which the upper rule acts on a
premise of the lower rule without touching the lower rule's auxiliary
formulas.  A verdict of Holds means every template admits a reordering
whose leaves all occur among the template's open leaves (duplication and
omission allowed); Fails reports the first template with no reordering.

Canonical-template conventions (these pin down an otherwise open-ended
quantification over derivations):

* when the interfering formula is carved from a context carrier shared by
  several premises of the lower rule, the upper rule is applied to the
  carved copy in every premise where it appears, with the same disjunct
  selection in each copy but with independently chosen context splits;
* single-succedent calculi additionally refine blocked (vacuous) pairs
  through a multi-succedent relaxation of the two rules, mirroring the
  standard correspondence between single- and multi-conclusion systems.
  A pair that stays vacuous or reorders under the relaxation is reported
  HoldsVacuously; a relaxed counter-template downgrades it to Fails.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from .kernel import (
    App, Atom, CalculusSpec, Fragment, MVar, NameGen, RuleSchema, SeqPattern,
    Sequent, Substitution, Term, applications, apply_subst, is_ground, mset,
    resolve, subst_term, term_key, unify, _match_side,
    CONTRACTION_LEFT, CONTRACTION_RIGHT, INITIAL, LOGICAL,
)

HOLDS = "holds"
HOLDS_VACUOUSLY = "holds_vacuously"
FAILS = "fails"
UNKNOWN = "unknown"


class NotApplicableError(Exception):
    pass


class BudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class Budget:
    max_templates: int = 4096
    max_candidate_depth: int = 3
    max_splits: int = 500_000

    def __post_init__(self):
        if min(self.max_templates, self.max_candidate_depth, self.max_splits) <= 0:
            raise ValueError("budget fields must be positive")


class BudgetTracker:
    def __init__(self, budget: Budget):
        self.budget = budget
        self.templates = 0
        self.steps = 0

    def count_template(self):
        self.templates += 1
        if self.templates > self.budget.max_templates:
            raise BudgetExhausted()

    def count_step(self, n: int = 1):
        self.steps += n
        if self.steps > self.budget.max_splits:
            raise BudgetExhausted()

    @property
    def used(self) -> int:
        return self.templates + self.steps


# ---------------------------------------------------------------------------
# Schema steps, templates, witnesses, verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchemaStep:
    """One backward rule application at a schematic sequent."""
    rule: str
    variant: int
    goal: SeqPattern
    main: Optional[tuple[str, int]]
    premises: tuple[SeqPattern, ...]


@dataclass(frozen=True)
class InterferenceTemplate:
    alpha: str
    beta: str
    alpha_variant: int
    beta_variant: int
    end: SeqPattern
    lower: SchemaStep
    upper: tuple[tuple[int, SchemaStep], ...]   # (alpha premise index, beta step)
    open_leaves: tuple[SeqPattern, ...]
    # context variable -> alternative decompositions introduced by context splits
    decomps: tuple[tuple[str, tuple[Fragment, ...]], ...]
    carve: str                                   # human-readable site description
    relaxed: bool = False

    def decomp_map(self) -> dict[str, tuple[Fragment, ...]]:
        return dict(self.decomps)


@dataclass(frozen=True)
class Witness:
    """Reordered two-layer schema: lower rule on top of the template's upper
    rule, with every leaf matched to an open leaf of the template."""
    bottom: SchemaStep
    upper: tuple[tuple[int, SchemaStep], ...]
    leaves: tuple[SeqPattern, ...]
    leaf_map: tuple[int, ...]


@dataclass(frozen=True)
class PermResult:
    verdict: str
    templates: tuple[InterferenceTemplate, ...] = ()
    witnesses: tuple[Witness, ...] = ()
    counter: Optional[InterferenceTemplate] = None
    relaxed: bool = False
    budget_used: int = 0

    def holds_edge(self) -> bool:
        return self.verdict in (HOLDS, HOLDS_VACUOUSLY)


# ---------------------------------------------------------------------------
# Renaming and relaxation
# ---------------------------------------------------------------------------

def _rename_term(t: Term, suffix: str) -> Term:
    if isinstance(t, MVar):
        return MVar(t.name + suffix)
    if isinstance(t, App):
        return App(t.conn, tuple(_rename_term(a, suffix) for a in t.args))
    return t


def _rename_pattern(p: SeqPattern, suffix: str) -> SeqPattern:
    return SeqPattern(
        tuple(_rename_term(t, suffix) for t in p.left),
        tuple(v + suffix for v in p.left_vars),
        tuple(_rename_term(t, suffix) for t in p.right),
        tuple(v + suffix for v in p.right_vars))


def rename_rule(rule: RuleSchema, suffix: str) -> RuleSchema:
    return replace(
        rule,
        conclusion=_rename_pattern(rule.conclusion, suffix),
        variants=tuple(tuple(_rename_pattern(p, suffix) for p in prems)
                       for prems in rule.variants))


def relax_rule(rule: RuleSchema) -> RuleSchema:
    """Add right-hand context room to a single-succedent rule: shared for
    context-copying rules, split across premises for context-splitting ones."""
    n = max((len(v) for v in rule.variants), default=0)
    if n >= 2 and rule.splits_context():
        conc_extra = tuple(f"Omega{k + 1}" for k in range(n))
        prem_extra = [(f"Omega{k + 1}",) for k in range(n)]
    else:
        conc_extra = ("Omega",)
        prem_extra = [("Omega",)] * max(n, 1)
    conc = replace(rule.conclusion,
                   right_vars=tuple(sorted(rule.conclusion.right_vars + conc_extra)))
    variants = tuple(
        tuple(replace(p, right_vars=tuple(sorted(p.right_vars + prem_extra[i])))
              for i, p in enumerate(prems))
        for prems in rule.variants)
    return replace(rule, conclusion=conc, variants=variants)


def relax_calculus(calc: CalculusSpec) -> CalculusSpec:
    """Multi-succedent relaxation used to refine vacuous verdicts."""
    rules = tuple(relax_rule(r) if r.kind != INITIAL else r for r in calc.rules)
    return replace(calc, name=calc.name + "~relaxed", rules=rules,
                   succedent_arity="multi")


# ---------------------------------------------------------------------------
# Schematic rule application with rigid context items
# ---------------------------------------------------------------------------
#
# In the reordering search every piece of context is rigid: an explicit
# formula pattern or a context-variable symbol.  Applying a rule distributes
# these items over the rule's conclusion context variables; a context
# variable item may first be expanded into one of its recorded
# decompositions.  No fresh splitting happens here.

Item = tuple[str, object]   # ("t", Term) | ("v", var name)


def _items(terms, vars_, skip_index=None) -> list[Item]:
    out: list[Item] = [("v", v) for v in vars_]
    for i, t in enumerate(terms):
        if i != skip_index:
            out.append(("t", t))
    return out


def _expansions(items: list[Item], decomps: dict[str, tuple[Fragment, ...]],
                tracker: BudgetTracker) -> Iterator[list[Item]]:
    options: list[list[list[Item]]] = []
    for kind, val in items:
        if kind == "v" and val in decomps:
            opts = [[(kind, val)]]
            for frag in decomps[val]:
                opts.append([("t", t) for t in frag.terms] +
                            [("v", v) for v in frag.vars])
            options.append(opts)
        else:
            options.append([[(kind, val)]])
    for combo in itertools.product(*options):
        tracker.count_step()
        yield [it for group in combo for it in group]


def _seq_items(p: SeqPattern, skip: Optional[tuple[str, int]]):
    skip_l = skip[1] if skip and skip[0] == "L" else None
    skip_r = skip[1] if skip and skip[0] == "R" else None
    return (_items(p.left, p.left_vars, skip_l),
            _items(p.right, p.right_vars, skip_r))


def _build_side(terms: list[Term], vitems: list[str]) -> tuple[tuple, tuple]:
    return mset(terms), tuple(sorted(vitems))


def schema_apply(rule: RuleSchema, variant: int, goal: SeqPattern,
                 main_pos: Optional[tuple[str, int]],
                 base_sub: dict[str, Term],
                 decomps: dict[str, tuple[Fragment, ...]],
                 tracker: BudgetTracker) -> Iterator[SchemaStep]:
    """All ways to apply ``rule`` backward at schematic ``goal`` treating
    context variables as indivisible items (optionally expanded through
    recorded decompositions)."""
    conc = rule.conclusion
    sub0 = dict(base_sub)
    if (rule.main is None) != (main_pos is None):
        return
    if rule.main is not None:
        sub1 = unify(subst_term(conc.get(rule.main), sub0), goal.get(main_pos), sub0)
        if sub1 is None:
            return
    else:
        sub1 = sub0

    litems, ritems = _seq_items(goal, main_pos)

    # conclusion terms other than the main must unify against goal term items
    def other_terms(side: str):
        terms, _ = conc.side(side)
        out = []
        for i, t in enumerate(terms):
            if rule.main is not None and rule.main == (side, i):
                continue
            out.append(t)
        return out

    for lexp in _expansions(litems, decomps, tracker):
        for rexp in _expansions(ritems, decomps, tracker):
            yield from _schema_apply_expanded(
                rule, variant, goal, main_pos, sub1,
                other_terms("L"), other_terms("R"), lexp, rexp, tracker)


def _schema_apply_expanded(rule, variant, goal, main_pos, sub,
                           oterms_l, oterms_r, litems, ritems, tracker):
    conc = rule.conclusion

    def match_others(oterms, items, sub):
        # injectively unify leftover conclusion terms against term items
        if not oterms:
            yield sub, items
            return
        t0 = oterms[0]
        seen = set()
        for idx, (kind, val) in enumerate(items):
            if kind != "t":
                continue
            key = term_key(resolve(val, sub))
            if key in seen:
                continue
            seen.add(key)
            s2 = unify(subst_term(t0, {}), val, sub)
            if s2 is not None:
                rest = items[:idx] + items[idx + 1:]
                yield from match_others(oterms[1:], rest, s2)

    for sub_l, litems2 in match_others(oterms_l, litems, sub):
        for sub2, ritems2 in match_others(oterms_r, ritems, sub_l):
            lv = conc.left_vars
            rv = conc.right_vars
            if (not lv and litems2) or (not rv and ritems2):
                continue
            l_assignments = itertools.product(range(len(lv)), repeat=len(litems2)) \
                if lv else [()]
            for lvec in l_assignments:
                r_assignments = itertools.product(range(len(rv)), repeat=len(ritems2)) \
                    if rv else [()]
                for rvec in r_assignments:
                    tracker.count_step()
                    content: dict[str, tuple[list, list]] = \
                        {v: ([], []) for v in lv + rv}
                    for (kind, val), vi in zip(litems2, lvec):
                        content[lv[vi]][0 if kind == "t" else 1].append(val)
                    for (kind, val), vi in zip(ritems2, rvec):
                        content[rv[vi]][0 if kind == "t" else 1].append(val)
                    fmap = {name: resolve(MVar(name), sub2) for name in sub2}
                    premises = []
                    for pi, p in enumerate(rule.variants[variant]):
                        lt = [subst_term(t, fmap) for t in p.left]
                        lvv: list[str] = []
                        for v in p.left_vars:
                            lt.extend(content[v][0])
                            lvv.extend(content[v][1])
                        rt = [subst_term(t, fmap) for t in p.right]
                        rvv: list[str] = []
                        for v in p.right_vars:
                            rt.extend(content[v][0])
                            rvv.extend(content[v][1])
                        premises.append(SeqPattern.make(lt, lvv, rt, rvv))
                    yield SchemaStep(rule.name, variant, goal, main_pos,
                                     tuple(premises))


# ---------------------------------------------------------------------------
# Interference templates
# ---------------------------------------------------------------------------

BETA_SUFFIX = "~b"


def _term_positions(p: SeqPattern, side: str, term: Term) -> list[int]:
    terms, _ = p.side(side)
    return [i for i, t in enumerate(terms) if t == term]


def _first_position(p: SeqPattern, side: str, term: Term) -> Optional[tuple[str, int]]:
    pos = _term_positions(p, side, term)
    return (side, pos[0]) if pos else None


def _carve_sites(alpha: RuleSchema, variant: int, side: str):
    """Sites in alpha's premises from which an interfering main formula can
    be drawn: context variables and pass-through metavariables, never
    auxiliary occurrences.  Returns (kind, name, hosts) triples."""
    prems = alpha.variants[variant]
    sites = []
    var_hosts: dict[str, list[int]] = {}
    mvar_hosts: dict[str, list[int]] = {}
    mvar_banned: set[str] = set()
    for i, p in enumerate(prems):
        terms, vars_ = p.side(side)
        aux = set(alpha.aux_indices(variant, i))
        for v in vars_:
            var_hosts.setdefault(v, []).append(i)
        for j, t in enumerate(terms):
            if isinstance(t, MVar):
                if (side, j) in aux:
                    mvar_banned.add(t.name)
                else:
                    mvar_hosts.setdefault(t.name, []).append(i)
        # any occurrence of the metavariable on the other side as an auxiliary
        # also bans it (the carve would instantiate an auxiliary)
        oside = "R" if side == "L" else "L"
        oterms, _ = p.side(oside)
        for j, t in enumerate(oterms):
            if isinstance(t, MVar) and (oside, j) in aux:
                mvar_banned.add(t.name)
    for v in sorted(var_hosts):
        sites.append(("ctx", v, tuple(var_hosts[v])))
    for m in sorted(mvar_hosts):
        if m not in mvar_banned:
            sites.append(("mvar", m, tuple(mvar_hosts[m])))
    return sites


def interference_templates(alpha: RuleSchema, beta: RuleSchema,
                           calc: CalculusSpec,
                           budget: Optional[Budget] = None,
                           _tracker: Optional[BudgetTracker] = None,
                           _relaxed: bool = False) -> list[InterferenceTemplate]:
    """Every way, up to renaming, for beta to act on one or more premises of
    alpha with beta's main formula drawn from alpha's context."""
    tracker = _tracker or BudgetTracker(budget or Budget())
    beta_r = rename_rule(beta, BETA_SUFFIX)
    if beta_r.main is None:
        return []
    bside = beta_r.main_side()
    out: list[InterferenceTemplate] = []
    for av in range(len(alpha.variants)):
        for kind, name, hosts in _carve_sites(alpha, av, bside):
            for bv in range(len(beta_r.variants)):
                out.extend(_templates_at_site(
                    alpha, av, beta_r, bv, kind, name, hosts, tracker, _relaxed))
    return out


def _templates_at_site(alpha, av, beta_r, bv, kind, name, hosts, tracker, relaxed):
    main_b = beta_r.conclusion.get(beta_r.main)
    namegen = NameGen(set(alpha.conclusion.all_vars())
                      | set(beta_r.conclusion.all_vars())
                      | {name})
    # refine alpha's schema so the carved formula appears explicitly
    if kind == "ctx":
        rem = namegen.fresh(name)
        sub = Substitution.make({}, {name: Fragment.make((main_b,), (rem,))})
        carve_desc = f"main of upper rule carved from context variable {name}"
    else:
        sub = Substitution.make({name: main_b}, {})
        carve_desc = f"main of upper rule instantiates pass-through {name}"
    conc = apply_subst(alpha.conclusion, sub)
    prems = tuple(apply_subst(p, sub) for p in alpha.variants[av])
    bside = beta_r.main_side()

    # beta acts on the carved copy in every hosting premise; enumerate the
    # context absorptions of each host independently
    host_solutions: list[list] = []
    for i in hosts:
        sols = _absorb_beta(beta_r, bv, prems[i], main_b, bside, namegen, tracker)
        if not sols:
            return []
        host_solutions.append(sols)

    out = []
    for combo in itertools.product(*host_solutions):
        tracker.count_template()
        upper = []
        leaves: list[SeqPattern] = []
        decomps: dict[str, list[Fragment]] = {}
        for i, (bprems, refines) in zip(hosts, combo):
            occ = _first_position(prems[i], bside, main_b)
            upper.append((i, SchemaStep(beta_r.name, bv, prems[i], occ, bprems)))
            leaves.extend(bprems)
            for w, frag in refines:
                if frag.terms or len(frag.vars) != 1 or frag.vars[0] != w:
                    decomps.setdefault(w, []).append(frag)
        for i, p in enumerate(prems):
            if i not in hosts:
                leaves.append(p)
        lower = SchemaStep(alpha.name, av, conc,
                           _main_after_subst(alpha, conc, sub), prems)
        out.append(InterferenceTemplate(
            alpha=alpha.name, beta=_strip(beta_r.name),
            alpha_variant=av, beta_variant=bv,
            end=conc, lower=lower, upper=tuple(upper),
            open_leaves=tuple(leaves),
            decomps=tuple(sorted((k, tuple(v)) for k, v in decomps.items())),
            carve=carve_desc, relaxed=relaxed))
    return out


def _strip(name: str) -> str:
    return name[:-len(BETA_SUFFIX)] if name.endswith(BETA_SUFFIX) else name


def _main_after_subst(alpha, conc_after, sub) -> Optional[tuple[str, int]]:
    if alpha.main is None:
        return None
    inst = subst_term(alpha.conclusion.get(alpha.main), sub.formulas())
    return _first_position(conc_after, alpha.main[0], inst)


def _absorb_beta(beta_r, bv, premise, main_b, bside, namegen, tracker):
    """Match beta's conclusion against an alpha premise with the main pinned
    to the carved occurrence; fresh context splits allowed."""
    pin_target = _term_positions(premise, bside, main_b)
    if not pin_target:
        return []
    ti = pin_target[0]
    conc = beta_r.conclusion
    p_terms, p_vars = conc.side(bside)
    mi = None
    for j, t in enumerate(p_terms):
        if (bside, j) == beta_r.main:
            mi = j
    t_terms, t_vars = premise.side(bside)
    o_side = "R" if bside == "L" else "L"
    po_terms, po_vars = conc.side(o_side)
    to_terms, to_vars = premise.side(o_side)

    sols = []
    seen = set()
    for s1, fr1, ref1 in _match_side(p_terms, p_vars, t_terms, t_vars, {}, namegen,
                                     pinned=(mi, ti)):
        for s2, fr2, ref2 in _match_side(po_terms, po_vars, to_terms, to_vars,
                                         s1, namegen):
            tracker.count_step()
            fmap = {name: resolve(MVar(name), s2) for name in s2}
            cmap = {}
            for v, frag in list(fr1.items()) + list(fr2.items()):
                cmap[v] = Fragment.make([resolve(t, s2) for t in frag.terms],
                                        frag.vars)
            sub = Substitution.make(fmap, cmap)
            refines = []
            for w, frag in sorted(list(ref1.items()) + list(ref2.items())):
                refines.append((w, Fragment.make(
                    [resolve(t, s2) for t in frag.terms], frag.vars)))
            bprems = tuple(apply_subst(p, sub) for p in beta_r.variants[bv])
            key = (bprems, tuple(refines))
            if key not in seen:
                seen.add(key)
                sols.append((bprems, tuple(refines)))
    return sols


# ---------------------------------------------------------------------------
# Reordering search
# ---------------------------------------------------------------------------

def _subsets_desc(indices: list[int]) -> Iterator[tuple[int, ...]]:
    for size in range(len(indices), -1, -1):
        for combo in itertools.combinations(indices, size):
            yield combo


def find_reorder(t: InterferenceTemplate, alpha: RuleSchema, beta: RuleSchema,
                 calc: CalculusSpec, tracker: BudgetTracker) -> Optional[Witness]:
    """Search for a reordered schema for one template: beta applied at the
    end sequent on the carved occurrence, alpha on zero or more of beta's
    premises, every leaf equal to some open leaf."""
    beta_r = rename_rule(beta, BETA_SUFFIX)
    main_b = beta_r.conclusion.get(beta_r.main)
    # the instantiated main formulas as they occur in this template
    first_upper = t.upper[0][1]
    main_b_inst = first_upper.goal.get(first_upper.main)
    main_a_inst = None
    if t.lower.main is not None:
        main_a_inst = t.end.get(t.lower.main)
    open_set = {leaf: i for i, leaf in enumerate(t.open_leaves)}
    decomps = t.decomp_map()

    bpos = _first_position(t.end, beta_r.main_side(), main_b_inst)
    if bpos is None:
        return None
    base_sub: dict[str, Term] = {}
    u = unify(main_b, main_b_inst, {})
    if u is None:
        return None
    base_sub = u

    for bstep in schema_apply(beta_r, t.beta_variant, t.end, bpos,
                              base_sub, decomps, tracker):
        hosts = []
        for k, prem in enumerate(bstep.premises):
            if main_a_inst is not None and \
                    _term_positions(prem, t.lower.main[0], main_a_inst):
                hosts.append(k)
        for chosen in _subsets_desc(hosts):
            skipped = [k for k in range(len(bstep.premises)) if k not in chosen]
            # premises left untouched must already be open leaves
            if any(bstep.premises[k] not in open_set for k in skipped):
                continue
            options = []
            ok = True
            for k in chosen:
                prem = bstep.premises[k]
                apos = _first_position(prem, t.lower.main[0], main_a_inst)
                steps = []
                for astep in schema_apply(alpha, t.alpha_variant, prem, apos,
                                          {}, decomps, tracker):
                    if all(p in open_set for p in astep.premises):
                        steps.append(astep)
                        break  # first fitting application suffices
                if not steps:
                    ok = False
                    break
                options.append((k, steps[0]))
            if not ok:
                continue
            leaves = [bstep.premises[k] for k in skipped]
            for _, astep in options:
                leaves.extend(astep.premises)
            leaf_map = tuple(open_set[l] for l in leaves)
            return Witness(bottom=bstep, upper=tuple(options),
                           leaves=tuple(leaves), leaf_map=leaf_map)
    return None


# ---------------------------------------------------------------------------
# permutes_up
# ---------------------------------------------------------------------------

def permutes_up(alpha: RuleSchema, beta: RuleSchema, calc: CalculusSpec,
                budget: Optional[Budget] = None,
                relax_single: bool = True) -> PermResult:
    """Decide whether ``alpha`` permutes up ``beta`` in ``calc``."""
    tracker = BudgetTracker(budget or Budget())
    try:
        templates = interference_templates(alpha, beta, calc, _tracker=tracker)
        if templates:
            return _decide(templates, alpha, beta, calc, tracker, relaxed=False)
        if relax_single and calc.succedent_arity == "single":
            rcalc = relax_calculus(calc)
            ra = rcalc.rule(alpha.name)
            rb = rcalc.rule(beta.name)
            rtemplates = interference_templates(ra, rb, rcalc,
                                                _tracker=tracker, _relaxed=True)
            if not rtemplates:
                return PermResult(HOLDS_VACUOUSLY, budget_used=tracker.used)
            res = _decide(rtemplates, ra, rb, rcalc, tracker, relaxed=True)
            if res.verdict == HOLDS:
                return PermResult(HOLDS_VACUOUSLY, templates=res.templates,
                                  relaxed=True, budget_used=tracker.used)
            return res
        return PermResult(HOLDS_VACUOUSLY, budget_used=tracker.used)
    except BudgetExhausted:
        return PermResult(UNKNOWN, budget_used=tracker.used)


def _decide(templates, alpha, beta, calc, tracker, relaxed) -> PermResult:
    witnesses = []
    for t in templates:
        w = find_reorder(t, alpha, beta, calc, tracker)
        if w is None:
            return PermResult(FAILS, templates=tuple(templates), counter=t,
                              relaxed=relaxed, budget_used=tracker.used)
        witnesses.append(w)
    return PermResult(HOLDS, templates=tuple(templates),
                      witnesses=tuple(witnesses), relaxed=relaxed,
                      budget_used=tracker.used)


# ---------------------------------------------------------------------------
# Contraction permutation (c up_c alpha)
# ---------------------------------------------------------------------------

def contraction_permutes_up_c(c: RuleSchema, alpha: RuleSchema,
                              calc: CalculusSpec,
                              budget: Optional[Budget] = None) -> PermResult:
    """Decide whether contracting alpha's main formula and then applying
    alpha to every contracted copy can be replaced by one alpha step with
    contraction moved onto alpha's auxiliary formulas."""
    if not c.is_contraction() or all(r.name != c.name for r in calc.rules):
        raise NotApplicableError(f"{calc.name} does not declare {c.name}")
    cside = "L" if c.kind == CONTRACTION_LEFT else "R"
    if not calc.has_weakening(cside):
        raise NotApplicableError(
            f"{calc.name} declares contraction without weakening on {cside}")
    if not alpha.is_logical():
        raise NotApplicableError("second rule must be logical")
    tracker = BudgetTracker(budget or Budget())
    if alpha.main_side() != cside:
        # this contraction can never contract alpha's main formula
        return PermResult(HOLDS_VACUOUSLY, budget_used=tracker.used)
    try:
        templates = _contraction_templates(c, alpha, cside, tracker)
        witnesses = []
        for t in templates:
            w = _contraction_reorder(t, alpha, calc, cside, tracker)
            if w is None:
                return PermResult(FAILS, templates=tuple(templates), counter=t,
                                  budget_used=tracker.used)
            witnesses.append(w)
        return PermResult(HOLDS, templates=tuple(templates),
                          witnesses=tuple(witnesses), budget_used=tracker.used)
    except BudgetExhausted:
        return PermResult(UNKNOWN, budget_used=tracker.used)


def _contraction_templates(c, alpha, cside, tracker):
    """Contraction of the main formula followed by alpha on every copy."""
    end = alpha.conclusion
    main = alpha.main_term()
    mpos = alpha.main
    # contraction premise: the end sequent with a second copy of the main
    if cside == "L":
        seq_c = SeqPattern.make(end.left + (main,), end.left_vars,
                                end.right, end.right_vars)
    else:
        seq_c = SeqPattern.make(end.left, end.left_vars,
                                end.right + (main,), end.right_vars)
    cpos = _first_position(seq_c, cside, main)
    cstep = SchemaStep(c.name, 0, end, mpos, (seq_c,))

    out = []
    for v1 in range(len(alpha.variants)):
        for step1 in schema_apply(alpha, v1, seq_c, cpos, {}, {}, tracker):
            # the remaining copy must be consumed wherever it occurs
            hosts = [(k, _first_position(p, cside, main))
                     for k, p in enumerate(step1.premises)
                     if _term_positions(p, cside, main)]
            if not hosts:
                continue
            for v2 in range(len(alpha.variants)):
                host_opts = []
                for k, pos in hosts:
                    opts = list(schema_apply(alpha, v2, step1.premises[k], pos,
                                             {}, {}, tracker))
                    host_opts.append([(k, s) for s in opts])
                for combo in itertools.product(*host_opts):
                    tracker.count_template()
                    leaves = [p for k, p in enumerate(step1.premises)
                              if all(k != kk for kk, _ in combo)]
                    for _, s in combo:
                        leaves.extend(s.premises)
                    out.append(InterferenceTemplate(
                        alpha=c.name, beta=alpha.name,
                        alpha_variant=v1, beta_variant=v2,
                        end=end, lower=cstep,
                        upper=((0, step1),) + tuple(combo),
                        open_leaves=tuple(leaves),
                        decomps=(),
                        carve=f"contraction of the main formula of {alpha.name}"))
    return out


def _contraction_reorder(t, alpha, calc, cside, tracker):
    """alpha once at the end, contraction on its auxiliaries in the premises."""
    end = t.end
    mpos = t.lower.main
    open_set = {leaf: i for i, leaf in enumerate(t.open_leaves)}
    # the disjunct selection of the bottom alpha application is free
    for w in range(len(alpha.variants)):
        for astep in schema_apply(alpha, w, end, mpos, {}, {}, tracker):
            per_premise = []
            for pi, prem in enumerate(astep.premises):
                # auxiliary occurrences of this premise, with their sides
                auxes = [(side, alpha.variants[w][pi].get((side, idx)))
                         for side, idx in alpha.aux_indices(w, pi)]
                choices = [prem]
                for r in range(1, len(auxes) + 1):
                    for combo in itertools.combinations(range(len(auxes)), r):
                        sides = {"L": list(prem.left), "R": list(prem.right)}
                        if not all(calc.has_contraction(auxes[i][0]) for i in combo):
                            continue
                        for i in combo:
                            side, term = auxes[i]
                            sides[side].append(term)
                        choices.append(SeqPattern.make(
                            sides["L"], prem.left_vars,
                            sides["R"], prem.right_vars))
                per_premise.append(choices)
            for combo in itertools.product(*per_premise):
                tracker.count_step()
                if all(leaf in open_set for leaf in combo):
                    return Witness(
                        bottom=SchemaStep(alpha.name, w, end, mpos, astep.premises),
                        upper=(),
                        leaves=tuple(combo),
                        leaf_map=tuple(open_set[l] for l in combo))
    return None
