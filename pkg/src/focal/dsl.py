"""Textual calculus format (.fcl): parser, canonical printer, built-ins.

Grammar (one statement per construct, ``#`` comments to end of line):

    calculus <name>
    succedent single|multi
    connective <name> <arity> [infix "<sym>"]
    rule <name>: <premises> / <conclusion>
    structural contraction left|right
    structural weakening left|right
    structural initial

Premises are sequents separated by ``;``; alternative premise groups of one
rule (disjunct selection) are separated by ``|``.  A sequent is written
``side |- side`` where a side is ``.`` (empty) or a comma list of formulas
and context variables.  The main formula is marked ``[F]`` in the
conclusion, auxiliary formulas ``[F]`` in premises.  Context variables are
capitalized Greek-letter names (Gamma, Delta, ...; primes allowed); other
capitalized identifiers are formula metavariables; lowercase identifiers
are atoms.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .kernel import (
    App, Atom, CalculusSpec, ConnectiveDecl, MVar, RuleSchema, SeqPattern,
    Term, mset, term_key,
    LOGICAL, CONTRACTION_LEFT, CONTRACTION_RIGHT,
    WEAKENING_LEFT, WEAKENING_RIGHT, INITIAL,
)

GREEK_BASES = ("Gamma", "Delta", "Lambda", "Pi", "Sigma", "Theta",
               "Xi", "Phi", "Psi", "Omega")

RESERVED = {"calculus", "succedent", "connective", "rule", "structural",
            "infix", "single", "multi", "contraction", "weakening",
            "initial", "left", "right"}


class FclError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


class FclSyntaxError(FclError):
    pass


class FclSemanticError(FclError):
    pass


def is_context_var(name: str) -> bool:
    stripped = name.rstrip("'")
    base = stripped.rstrip("0123456789")
    return base in GREEK_BASES


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Tok:
    kind: str  # IDENT INT STRING PUNCT OP TURNSTILE NEWLINE EOF
    text: str
    line: int
    col: int


PUNCT = {",", ";", "/", "|", "[", "]", "(", ")", ":"}


def tokenize(src: str) -> list[Tok]:
    toks: list[Tok] = []
    line = 1
    col = 1
    i = 0
    n = len(src)
    while i < n:
        ch = src[i]
        if ch == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            toks.append(Tok("NEWLINE", "\n", line, col))
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("|-", i):
            toks.append(Tok("TURNSTILE", "|-", line, col))
            i += 2
            col += 2
            continue
        if ch == "⊢":  # ⊢
            toks.append(Tok("TURNSTILE", "|-", line, col))
            i += 1
            col += 1
            continue
        if ch in PUNCT:
            toks.append(Tok("PUNCT", ch, line, col))
            i += 1
            col += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and src[j] != '"':
                j += 1
            if j >= n:
                raise FclSyntaxError("unterminated string", line, col)
            toks.append(Tok("STRING", src[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Tok("INT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            toks.append(Tok("IDENT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        # anything else is an operator symbol run (grabs unicode connectives)
        j = i
        while j < n and not (src[j].isalnum() or src[j] in " \t\r\n_'\"#") \
                and src[j] not in PUNCT and src[j] != "⊢" \
                and not src.startswith("|-", j):
            j += 1
        if j == i:
            raise FclSyntaxError(f"unexpected character {ch!r}", line, col)
        toks.append(Tok("OP", src[i:j], line, col))
        col += j - i
        i = j
    toks.append(Tok("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

@dataclass
class _MarkedTerm:
    term: Term
    marked: bool


@dataclass
class _RawSide:
    vars: list[str]
    terms: list[_MarkedTerm]


@dataclass
class _RawSeq:
    left: _RawSide
    right: _RawSide
    line: int
    col: int


class _Parser:
    def __init__(self, toks: list[Tok]):
        self.toks = toks
        self.i = 0
        self.name: Optional[str] = None
        self.succedent = "multi"
        self.connectives: list[ConnectiveDecl] = []
        self.infix: dict[str, str] = {}  # symbol -> connective name
        self.raw_rules: list[tuple[str, list[list[_RawSeq]], _RawSeq, Tok]] = []
        self.structural: list[tuple[str, Tok]] = []

    # -- token helpers
    def peek(self) -> Tok:
        return self.toks[self.i]

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def skip_newlines(self):
        while self.peek().kind == "NEWLINE":
            self.next()

    def expect(self, kind: str, text: Optional[str] = None) -> Tok:
        t = self.next()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise FclSyntaxError(f"expected {want}, got {t.text!r}", t.line, t.col)
        return t

    def expect_ident(self, *texts: str) -> Tok:
        t = self.expect("IDENT")
        if texts and t.text not in texts:
            raise FclSyntaxError(
                f"expected one of {'/'.join(texts)}, got {t.text!r}", t.line, t.col)
        return t

    # -- top level
    def parse(self) -> CalculusSpec:
        self.skip_newlines()
        while self.peek().kind != "EOF":
            t = self.expect("IDENT")
            if t.text == "calculus":
                self.name = self.expect("IDENT").text
            elif t.text == "succedent":
                self.succedent = self.expect_ident("single", "multi").text
            elif t.text == "connective":
                self.parse_connective()
            elif t.text == "rule":
                self.parse_rule()
            elif t.text == "structural":
                self.parse_structural()
            else:
                raise FclSyntaxError(f"unknown statement {t.text!r}", t.line, t.col)
            if self.peek().kind not in ("NEWLINE", "EOF"):
                t2 = self.peek()
                raise FclSyntaxError(f"trailing input {t2.text!r}", t2.line, t2.col)
            self.skip_newlines()
        if self.name is None:
            raise FclSemanticError("missing 'calculus <name>' header")
        return self.build()

    def parse_connective(self):
        name = self.expect("IDENT").text
        arity = int(self.expect("INT").text)
        notation = None
        if self.peek().kind == "IDENT" and self.peek().text == "infix":
            self.next()
            notation = self.expect("STRING").text
            if arity != 2:
                t = self.peek()
                raise FclSemanticError(
                    f"infix notation requires arity 2 ({name})", t.line, t.col)
        self.connectives.append(ConnectiveDecl(name, arity, notation))
        if notation:
            self.infix[notation] = name

    def parse_structural(self):
        t = self.expect_ident("contraction", "weakening", "initial")
        if t.text == "initial":
            self.structural.append((INITIAL, t))
            return
        side = self.expect_ident("left", "right").text
        kind = {("contraction", "left"): CONTRACTION_LEFT,
                ("contraction", "right"): CONTRACTION_RIGHT,
                ("weakening", "left"): WEAKENING_LEFT,
                ("weakening", "right"): WEAKENING_RIGHT}[(t.text, side)]
        self.structural.append((kind, t))

    def parse_rule(self):
        tname = self.expect("IDENT")
        self.expect("PUNCT", ":")
        groups: list[list[_RawSeq]] = [[]]
        groups[0].append(self.parse_sequent())
        while True:
            t = self.peek()
            if t.kind == "PUNCT" and t.text == ";":
                self.next()
                groups[-1].append(self.parse_sequent())
            elif t.kind == "PUNCT" and t.text == "|":
                self.next()
                groups.append([self.parse_sequent()])
            else:
                break
        self.expect("PUNCT", "/")
        conclusion = self.parse_sequent()
        self.raw_rules.append((tname.text, groups, conclusion, tname))

    def parse_sequent(self) -> _RawSeq:
        t0 = self.peek()
        left = self.parse_side()
        self.expect("TURNSTILE")
        right = self.parse_side()
        return _RawSeq(left, right, t0.line, t0.col)

    def parse_side(self) -> _RawSide:
        side = _RawSide([], [])
        t = self.peek()
        if t.kind == "TURNSTILE" or (t.kind == "PUNCT" and t.text in (";", "/", "|")):
            return side  # empty side
        if t.kind == "OP" and t.text == ".":
            self.next()
            return side
        while True:
            self.parse_side_item(side)
            t = self.peek()
            if t.kind == "PUNCT" and t.text == ",":
                self.next()
                continue
            return side

    def parse_side_item(self, side: _RawSide):
        t = self.peek()
        if t.kind == "IDENT" and is_context_var(t.text):
            self.next()
            side.vars.append(t.text)
            return
        if t.kind == "PUNCT" and t.text == "[":
            self.next()
            f = self.parse_formula()
            self.expect("PUNCT", "]")
            side.terms.append(_MarkedTerm(f, True))
            return
        side.terms.append(_MarkedTerm(self.parse_formula(), False))

    def parse_formula(self) -> Term:
        lhs = self.parse_primary()
        t = self.peek()
        if t.kind == "OP" and t.text in self.infix:
            self.next()
            rhs = self.parse_primary()
            return App(self.infix[t.text], (lhs, rhs))
        return lhs

    def parse_primary(self) -> Term:
        t = self.next()
        if t.kind == "PUNCT" and t.text == "(":
            f = self.parse_formula()
            self.expect("PUNCT", ")")
            return f
        if t.kind != "IDENT":
            raise FclSyntaxError(f"expected formula, got {t.text!r}", t.line, t.col)
        name = t.text
        if self.peek().kind == "PUNCT" and self.peek().text == "(":
            self.next()
            args = [self.parse_formula()]
            while self.peek().kind == "PUNCT" and self.peek().text == ",":
                self.next()
                args.append(self.parse_formula())
            self.expect("PUNCT", ")")
            return App(name, tuple(args))
        if is_context_var(name):
            raise FclSyntaxError(
                f"context variable {name} inside a formula", t.line, t.col)
        if name[0].isupper():
            return MVar(name)
        return Atom(name)

    # -- schema building
    def build(self) -> CalculusSpec:
        rules: list[RuleSchema] = []
        for name, groups, conclusion, tok in self.raw_rules:
            rules.append(self.build_logical(name, groups, conclusion, tok))
        for kind, tok in self.structural:
            rules.append(build_structural(kind, self.succedent))
        spec = CalculusSpec(
            name=self.name,
            connectives=tuple(sorted(self.connectives, key=lambda c: c.name)),
            rules=tuple(sorted(rules, key=lambda r: r.name)),
            succedent_arity=self.succedent,
        )
        try:
            spec.validate()
        except FclError:
            raise
        except Exception as e:
            raise FclSemanticError(str(e)) from e
        return spec

    def build_logical(self, name, groups, conclusion, tok) -> RuleSchema:
        conc, main = build_pattern(conclusion, expect_main=True)
        if main is None:
            raise FclSemanticError(
                f"rule {name}: no [main] formula in conclusion", tok.line, tok.col)
        variants = []
        auxiliaries = []
        for group in groups:
            prems = []
            auxes = []
            for raw in group:
                p, marks = build_pattern_multi(raw)
                prems.append(p)
                auxes.append(marks)
            variants.append(tuple(prems))
            auxiliaries.append(tuple(auxes))
        return RuleSchema(
            name=name, kind=LOGICAL, conclusion=conc,
            variants=tuple(variants), main=main,
            auxiliaries=tuple(auxiliaries))


def build_pattern(raw: _RawSeq, expect_main: bool) -> tuple[SeqPattern, Optional[tuple[str, int]]]:
    pat, marks = build_pattern_multi(raw)
    if expect_main:
        if len(marks) > 1:
            raise FclSemanticError("more than one [main] mark in conclusion",
                                   raw.line, raw.col)
        return pat, (marks[0] if marks else None)
    return pat, None


def build_pattern_multi(raw: _RawSeq) -> tuple[SeqPattern, tuple[tuple[str, int], ...]]:
    """Build a SeqPattern and resolve [..] marks to (side, index) positions
    in the canonically sorted term tuples."""
    marks: list[tuple[str, int]] = []

    def one_side(side_name: str, side: _RawSide):
        pairs = sorted(((mt.term, mt.marked) for mt in side.terms),
                       key=lambda p: term_key(p[0]))
        terms = tuple(p[0] for p in pairs)
        for i, (_, marked) in enumerate(pairs):
            if marked:
                marks.append((side_name, i))
        return terms, tuple(sorted(side.vars))

    lt, lv = one_side("L", raw.left)
    rt, rv = one_side("R", raw.right)
    return SeqPattern(lt, lv, rt, rv), tuple(marks)


def build_structural(kind: str, succedent: str) -> RuleSchema:
    F = MVar("F")
    single = succedent == "single"
    right_ctx = () if single else ("Delta",)
    right_terms = (MVar("C"),) if single else ()

    def seq(left_terms, right_extra=()):
        return SeqPattern(mset(left_terms), ("Gamma",),
                          mset(right_terms + right_extra), right_ctx)

    if kind == INITIAL:
        conc = SeqPattern((F,), (), (F,), ())
        return RuleSchema("init", INITIAL, conc, ((),), None, ((),))
    if kind == CONTRACTION_LEFT:
        conc = seq((F,))
        prem = seq((F, F))
        return RuleSchema("c_l", kind, conc, ((prem,),), ("L", 0),
                          ((( ("L", 0), ("L", 1)),),))
    if kind == CONTRACTION_RIGHT:
        if single:
            raise FclSemanticError("contraction right in single-succedent calculus")
        conc = SeqPattern((), ("Gamma",), (F,), ("Delta",))
        prem = SeqPattern((), ("Gamma",), (F, F), ("Delta",))
        return RuleSchema("c_r", kind, conc, ((prem,),), ("R", 0),
                          ((( ("R", 0), ("R", 1)),),))
    if kind == WEAKENING_LEFT:
        conc = seq((F,))
        prem = seq(())
        return RuleSchema("w_l", kind, conc, ((prem,),), ("L", 0), (((),),))
    if kind == WEAKENING_RIGHT:
        if single:
            raise FclSemanticError("weakening right in single-succedent calculus")
        conc = SeqPattern((), ("Gamma",), (F,), ("Delta",))
        prem = SeqPattern((), ("Gamma",), (), ("Delta",))
        return RuleSchema("w_r", kind, conc, ((prem,),), ("R", 0), (((),),))
    raise FclSemanticError(f"unknown structural kind {kind}")


def parse_calculus(src: str) -> CalculusSpec:
    """Parse and validate an .fcl document."""
    return _Parser(tokenize(src)).parse()


# ---------------------------------------------------------------------------
# Canonical printer
# ---------------------------------------------------------------------------

def format_term(t: Term, spec: CalculusSpec, parens: bool = False) -> str:
    if isinstance(t, (Atom, MVar)):
        return t.name
    decl = spec.connective(t.conn)
    if decl.notation and len(t.args) == 2:
        inner = f"{format_term(t.args[0], spec, True)} {decl.notation} " \
                f"{format_term(t.args[1], spec, True)}"
        return f"({inner})" if parens else inner
    return f"{t.conn}({', '.join(format_term(a, spec) for a in t.args)})"


def format_pattern(p: SeqPattern, spec: CalculusSpec,
                   marks: tuple[tuple[str, int], ...] = ()) -> str:
    def one(side_name, terms, vars_):
        parts = list(vars_)
        for i, t in enumerate(terms):
            s = format_term(t, spec)
            if (side_name, i) in marks:
                s = f"[{s}]"
            parts.append(s)
        return ", ".join(parts) if parts else "."
    return f"{one('L', p.left, p.left_vars)} |- {one('R', p.right, p.right_vars)}"


def format_sequent(s, spec: CalculusSpec) -> str:
    p = s if isinstance(s, SeqPattern) else SeqPattern(s.left, (), s.right, ())
    return format_pattern(p, spec)


def print_calculus(spec: CalculusSpec) -> str:
    """Canonical text: sorted rule names, LF line endings; parse o print = id."""
    lines = [f"calculus {spec.name}", f"succedent {spec.succedent_arity}"]
    for c in sorted(spec.connectives, key=lambda c: c.name):
        decl = f"connective {c.name} {c.arity}"
        if c.notation:
            decl += f' infix "{c.notation}"'
        lines.append(decl)
    structural_lines = []
    for r in sorted(spec.rules, key=lambda r: r.name):
        if r.kind == LOGICAL:
            groups = []
            for vi, prems in enumerate(r.variants):
                parts = [format_pattern(p, spec, r.auxiliaries[vi][pi])
                         for pi, p in enumerate(prems)]
                groups.append(" ; ".join(parts))
            main_marks = (r.main,) if r.main else ()
            conc = format_pattern(r.conclusion, spec, main_marks)
            lines.append(f"rule {r.name}: {' | '.join(groups)} / {conc}")
        else:
            word = {CONTRACTION_LEFT: "contraction left",
                    CONTRACTION_RIGHT: "contraction right",
                    WEAKENING_LEFT: "weakening left",
                    WEAKENING_RIGHT: "weakening right",
                    INITIAL: "initial"}[r.kind]
            structural_lines.append(f"structural {word}")
    lines.extend(sorted(structural_lines))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Built-in calculi
# ---------------------------------------------------------------------------
#
# Rule-name correspondence with the usual symbolic names:
#   tensor = multiplicative conjunction, plus = additive disjunction,
#   par = multiplicative disjunction, with = additive conjunction;
#   and_a/and_m, or_a/or_m = additive/multiplicative forms; imp = implication.

MALL_SRC = """\
calculus mall
succedent multi
connective tensor 2 infix "⊗"
connective plus 2 infix "⊕"
connective par 2 infix "⅋"
connective with 2 infix "&"
rule tensor_l: Gamma, [A], [B] |- Delta / Gamma, [A ⊗ B] |- Delta
rule tensor_r: Gamma |- Delta, [A] ; Gamma' |- Delta', [B] / Gamma, Gamma' |- Delta, Delta', [A ⊗ B]
rule plus_l: Gamma, [A] |- Delta ; Gamma, [B] |- Delta / Gamma, [A ⊕ B] |- Delta
rule plus_r: Gamma |- Delta, [A] | Gamma |- Delta, [B] / Gamma |- Delta, [A ⊕ B]
rule par_l: Gamma, [A] |- Delta ; Gamma', [B] |- Delta' / Gamma, Gamma', [A ⅋ B] |- Delta, Delta'
rule par_r: Gamma |- Delta, [A], [B] / Gamma |- Delta, [A ⅋ B]
rule with_l: Gamma, [A] |- Delta | Gamma, [B] |- Delta / Gamma, [A & B] |- Delta
rule with_r: Gamma |- Delta, [A] ; Gamma |- Delta, [B] / Gamma |- Delta, [A & B]
structural initial
"""

LK_SRC = """\
calculus lk
succedent multi
connective and 2 infix "∧"
connective or 2 infix "∨"
rule and_a_l: Gamma, [A] |- Delta | Gamma, [B] |- Delta / Gamma, [A ∧ B] |- Delta
rule and_m_l: Gamma, [A], [B] |- Delta / Gamma, [A ∧ B] |- Delta
rule and_a_r: Gamma |- Delta, [A] ; Gamma |- Delta, [B] / Gamma |- Delta, [A ∧ B]
rule and_m_r: Gamma |- Delta, [A] ; Gamma' |- Delta', [B] / Gamma, Gamma' |- Delta, Delta', [A ∧ B]
rule or_a_l: Gamma, [A] |- Delta ; Gamma, [B] |- Delta / Gamma, [A ∨ B] |- Delta
rule or_m_l: Gamma, [A] |- Delta ; Gamma', [B] |- Delta' / Gamma, Gamma', [A ∨ B] |- Delta, Delta'
rule or_a_r: Gamma |- Delta, [A] | Gamma |- Delta, [B] / Gamma |- Delta, [A ∨ B]
rule or_m_r: Gamma |- Delta, [A], [B] / Gamma |- Delta, [A ∨ B]
structural contraction left
structural contraction right
structural weakening left
structural weakening right
structural initial
"""

LJ_SRC = """\
calculus lj
succedent single
connective and 2 infix "∧"
connective or 2 infix "∨"
connective imp 2 infix "→"
rule and_a_l: Gamma, [A] |- C | Gamma, [B] |- C / Gamma, [A ∧ B] |- C
rule and_m_l: Gamma, [A], [B] |- C / Gamma, [A ∧ B] |- C
rule and_a_r: Gamma |- [A] ; Gamma |- [B] / Gamma |- [A ∧ B]
rule and_m_r: Gamma |- [A] ; Gamma' |- [B] / Gamma, Gamma' |- [A ∧ B]
rule or_l: Gamma, [A] |- C ; Gamma, [B] |- C / Gamma, [A ∨ B] |- C
rule or_r: Gamma |- [A] | Gamma |- [B] / Gamma |- [A ∨ B]
rule imp_l: Gamma |- [A] ; Gamma', [B] |- C / Gamma, Gamma', [A → B] |- C
rule imp_r: Gamma, [A] |- [B] / Gamma |- [A → B]
structural contraction left
structural weakening left
structural initial
"""

LJM_SRC = """\
calculus ljm
succedent single
connective and 2 infix "∧"
connective or 2 infix "∨"
connective imp 2 infix "→"
rule and_l: Gamma, [A], [B] |- C / Gamma, [A ∧ B] |- C
rule and_r: Gamma |- [A] ; Gamma' |- [B] / Gamma, Gamma' |- [A ∧ B]
rule or_l: Gamma, [A] |- C ; Gamma, [B] |- C / Gamma, [A ∨ B] |- C
rule or_r: Gamma |- [A] | Gamma |- [B] / Gamma |- [A ∨ B]
rule imp_l: Gamma |- [A] ; Gamma', [B] |- C / Gamma, Gamma', [A → B] |- C
rule imp_r: Gamma, [A] |- [B] / Gamma |- [A → B]
structural contraction left
structural weakening left
structural initial
"""

BUILTIN_SOURCES = {
    "mall": MALL_SRC,
    "lk": LK_SRC,
    "lj": LJ_SRC,
    "ljm": LJM_SRC,
}

_builtin_cache: dict[str, CalculusSpec] = {}


def builtin(name: str) -> CalculusSpec:
    if name not in BUILTIN_SOURCES:
        raise KeyError(f"unknown built-in calculus {name!r}")
    if name not in _builtin_cache:
        _builtin_cache[name] = parse_calculus(BUILTIN_SOURCES[name])
    return _builtin_cache[name]
