"""Ladder-operator polynomials, quantization maps and ordering rewrites.

Coefficients are exact sympy expressions in ``hbar``, ``m_k`` and ``omega_k``
until :meth:`LadderPolynomial.numeric` substitutes a :class:`ModeSpace`.
A ladder word is stored per mode as a tuple of flags (0 = a, 1 = a†); words
on different modes commute, so a multi-mode word is a tuple of per-mode
words.
"""
from __future__ import annotations

import enum
import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np
import sympy as sp

from . import fock, phasespace
from .errors import DomainError, OrderingError, ParseError
from .fock import DensityOperator, ModeSpace

MAX_DEGREE = 8
A, ADAG = 0, 1

HBAR = sp.Symbol("hbar", positive=True)


def mass_symbol(k: int) -> sp.Symbol:
    return sp.Symbol(f"m_{k}", positive=True)


def omega_symbol(k: int) -> sp.Symbol:
    return sp.Symbol(f"omega_{k}", positive=True)


def _q_scale(k):
    return sp.sqrt(HBAR / (2 * mass_symbol(k) * omega_symbol(k)))


def _p_scale(k):
    return sp.sqrt(HBAR * mass_symbol(k) * omega_symbol(k) / 2)


def _exact(c) -> sp.Expr:
    """Exact sympy number for a Python/numpy scalar (floats via their repr)."""
    if isinstance(c, sp.Basic):
        return c
    if isinstance(c, Fraction):
        return sp.Rational(c.numerator, c.denominator)
    if isinstance(c, (int, np.integer)):
        return sp.Integer(int(c))
    c = complex(c)
    re_, im_ = sp.Rational(repr(c.real)), sp.Rational(repr(c.imag))
    return re_ + sp.I * im_


class Ordering(str, enum.Enum):
    ARBITRARY = "arbitrary"
    NORMAL = "normal"
    ANTINORMAL = "antinormal"
    SYMMETRIC = "symmetric"


# -- classical polynomials ------------------------------------------------


@dataclass(frozen=True)
class PhasePolynomial:
    """Polynomial in commuting q_k, p_k.

    ``terms`` maps exponent tuples ``(a_0, b_0, a_1, b_1, ...)`` (powers of
    q_k and p_k) to numeric coefficients.
    """

    modes: int
    terms: Mapping[tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self):
        merged: dict[tuple[int, ...], complex] = {}
        for powers, c in dict(self.terms).items():
            powers = tuple(int(x) for x in powers)
            if len(powers) != 2 * self.modes or min(powers, default=0) < 0:
                raise DomainError(f"bad exponent tuple {powers} for {self.modes} mode(s)")
            merged[powers] = merged.get(powers, 0) + c
        object.__setattr__(self, "terms", {k: v for k, v in sorted(merged.items()) if v != 0})

    @classmethod
    def monomial(cls, modes: int = 1, coefficient=1, **powers) -> "PhasePolynomial":
        """``monomial(q=2, p=1)`` or ``monomial(2, q1=3)`` style constructor."""
        exps = [0] * (2 * modes)
        for name, n in powers.items():
            var, idx = name[0], int(name[1:] or 0)
            exps[2 * idx + (var == "p")] = n
        return cls(modes, {tuple(exps): coefficient})

    @classmethod
    def constant(cls, value, modes: int = 1) -> "PhasePolynomial":
        return cls(modes, {(0,) * (2 * modes): value})

    @property
    def degree(self) -> int:
        return max((sum(p) for p in self.terms), default=0)

    def __add__(self, other: "PhasePolynomial") -> "PhasePolynomial":
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0) + v
        return PhasePolynomial(self.modes, terms)

    def __mul__(self, other) -> "PhasePolynomial":
        if not isinstance(other, PhasePolynomial):
            return PhasePolynomial(self.modes, {k: v * other for k, v in self.terms.items()})
        terms: dict = {}
        for (k1, v1), (k2, v2) in itertools.product(self.terms.items(), other.terms.items()):
            k = tuple(x + y for x, y in zip(k1, k2))
            terms[k] = terms.get(k, 0) + v1 * v2
        return PhasePolynomial(self.modes, terms)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __pow__(self, n: int) -> "PhasePolynomial":
        out = PhasePolynomial.constant(1, self.modes)
        for _ in range(n):
            out = out * self
        return out

    def evaluate(self, point: phasespace.PhasePoint):
        qs = [point.q(k) for k in range(self.modes)]
        ps_ = [point.p(k) for k in range(self.modes)]
        total = 0
        for powers, c in self.terms.items():
            term = c
            for k in range(self.modes):
                term = term * qs[k] ** powers[2 * k] * ps_[k] ** powers[2 * k + 1]
            total = total + term
        return total

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for powers, c in self.terms.items():
            factors = [repr(c)]
            for k in range(self.modes):
                sfx = f"_{k}" if self.modes > 1 else ""
                for var, n in (("q", powers[2 * k]), ("p", powers[2 * k + 1])):
                    if n:
                        factors.append(f"{var}{sfx}" + (f"^{n}" if n > 1 else ""))
            parts.append("*".join(factors))
        return " + ".join(parts)


# -- ladder polynomials ---------------------------------------------------

Word = tuple[tuple[int, ...], ...]


def _is_antinormal_word(w: tuple[int, ...]) -> bool:
    return all(not (x == ADAG and y == A) for x, y in zip(w, w[1:]))


def _is_normal_word(w: tuple[int, ...]) -> bool:
    return all(not (x == A and y == ADAG) for x, y in zip(w, w[1:]))


@dataclass(frozen=True)
class LadderPolynomial:
    """Finite sum of coefficient × ladder word, with an ordering tag."""

    modes: int
    terms: Mapping[Word, sp.Expr] = field(default_factory=dict)
    ordering: Ordering = Ordering.ARBITRARY

    def __post_init__(self):
        merged: dict[Word, sp.Expr] = {}
        for word, c in dict(self.terms).items():
            word = tuple(tuple(int(x) for x in w) for w in word)
            if len(word) != self.modes:
                raise DomainError(f"word {word} does not have {self.modes} mode slot(s)")
            merged[word] = merged.get(word, sp.Integer(0)) + _exact(c)
        cleaned = {}
        for word in sorted(merged, key=lambda w: (sum(map(len, w)), w)):
            c = sp.expand(merged[word])
            if c != 0:
                cleaned[word] = c
        object.__setattr__(self, "terms", cleaned)
        object.__setattr__(self, "ordering", Ordering(self.ordering))
        if self.ordering is Ordering.ANTINORMAL and not self.words_antinormal():
            raise OrderingError("tagged anti-normal but contains a† before a")
        if self.ordering is Ordering.NORMAL and not all(
            _is_normal_word(w) for word in self.terms for w in word
        ):
            raise OrderingError("tagged normal but contains a before a†")

    @classmethod
    def word(cls, *letters: str, modes: int = 1, coefficient=1) -> "LadderPolynomial":
        """Build a single word from letters like ``"a"``, ``"a'"``, ``"a_1'"``."""
        slots = [[] for _ in range(modes)]
        for letter in letters:
            m = re.fullmatch(r"a(?:_?(\d+))?('?)", letter)
            if not m:
                raise DomainError(f"bad ladder letter {letter!r}")
            slots[int(m.group(1) or 0)].append(ADAG if m.group(2) else A)
        return cls._tagged(modes, {tuple(tuple(s) for s in slots): coefficient})

    @classmethod
    def _tagged(cls, modes: int, terms) -> "LadderPolynomial":
        """Anti-normal tag when every word already is anti-normal, else arbitrary."""
        op = cls(modes, terms, Ordering.ARBITRARY)
        return op.retag(Ordering.ANTINORMAL) if op.words_antinormal() else op

    def words_antinormal(self) -> bool:
        return all(_is_antinormal_word(w) for word in self.terms for w in word)

    @property
    def degree(self) -> int:
        return max((sum(map(len, w)) for w in self.terms), default=0)

    def mode_degree(self, k: int) -> int:
        return max((len(w[k]) for w in self.terms), default=0)

    def retag(self, ordering) -> "LadderPolynomial":
        return LadderPolynomial(self.modes, self.terms, ordering)

    def __add__(self, other: "LadderPolynomial") -> "LadderPolynomial":
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0) + v
        if self.ordering == other.ordering:
            return LadderPolynomial(self.modes, terms, self.ordering)
        return LadderPolynomial._tagged(self.modes, terms)

    def __mul__(self, other) -> "LadderPolynomial":
        if not isinstance(other, LadderPolynomial):
            return LadderPolynomial(self.modes, {k: v * _exact(other) for k, v in self.terms.items()}, self.ordering)
        terms: dict = {}
        for (w1, c1), (w2, c2) in itertools.product(self.terms.items(), other.terms.items()):
            w = tuple(x + y for x, y in zip(w1, w2))
            terms[w] = terms.get(w, 0) + c1 * c2
        return LadderPolynomial._tagged(self.modes, terms)

    def __rmul__(self, scalar) -> "LadderPolynomial":
        return self * scalar

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def numeric(self, space: ModeSpace) -> dict[Word, complex]:
        """Coefficients with the space's hbar, masses and frequencies substituted."""
        subs = {HBAR: space.hbar}
        for k in range(self.modes):
            subs[mass_symbol(k)] = space.mass[k]
            subs[omega_symbol(k)] = space.omega[k]
        return {w: complex(sp.N(c.subs(subs), 30)) for w, c in self.terms.items()}

    def matrix(self, space: ModeSpace) -> np.ndarray:
        """Exact matrix elements on the truncated levels.

        Each word is multiplied out in a space padded by the word length and
        then cropped, so truncation never corrupts the retained block.
        """
        if space.modes != self.modes:
            raise DomainError(f"operator has {self.modes} mode(s), space has {space.modes}")
        out = np.zeros((space.dim, space.dim), dtype=complex)
        for word, c in self.numeric(space).items():
            factors = [_word_matrix(w, d) for w, d in zip(word, space.dims)]
            mat = factors[0]
            for f in factors[1:]:
                mat = np.kron(mat, f)
            out += c * mat
        return out

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for word, c in self.terms.items():
            letters = []
            for k, w in enumerate(word):
                sfx = f"_{k}" if self.modes > 1 else ""
                letters += [("a" + sfx + ("'" if x else "")) for x in w]
            parts.append("*".join([f"({c})"] + letters))
        return " + ".join(parts)


@lru_cache(maxsize=None)
def _word_matrix(w: tuple[int, ...], d: int) -> np.ndarray:
    pad = d + len(w)
    low = fock.lowering_matrix(pad)
    mats = {A: low, ADAG: low.T}
    out = np.eye(pad, dtype=complex)
    for x in w:
        out = out @ mats[x]
    out = out[:d, :d]
    out.setflags(write=False)
    return out


# -- quantization maps ----------------------------------------------------


def _expand_factors(factors: list[dict[int, complex]]) -> dict[tuple[int, ...], complex]:
    """Multiply out a product of non-commuting linear forms in a, a†."""
    words: dict[tuple[int, ...], complex] = {(): 1}
    for form in factors:
        nxt: dict[tuple[int, ...], complex] = {}
        for w, c in words.items():
            for letter, f in form.items():
                key = w + (letter,)
                nxt[key] = nxt.get(key, 0) + c * f
        words = nxt
    return words


# q ∝ a + a†,  p ∝ i(a† - a); the i and the unit scales are applied separately.
_Q_FORM = {A: 1, ADAG: 1}
_P_FORM = {A: -1, ADAG: 1}


def _weyl_mode(a: int, b: int) -> dict[tuple[int, ...], tuple[Fraction, Fraction]]:
    """Symmetrized q^a p^b for one mode, without unit scales or i^b."""
    total: dict[tuple[int, ...], int] = {}
    count = 0
    for slots in itertools.combinations(range(a + b), a):
        slots = set(slots)
        factors = [_Q_FORM if i in slots else _P_FORM for i in range(a + b)]
        for w, c in _expand_factors(factors).items():
            total[w] = total.get(w, 0) + c
        count += 1
    return {w: Fraction(c, count) for w, c in total.items() if c}


def _mode_prefactor(k: int, a: int, b: int) -> sp.Expr:
    return _q_scale(k) ** a * (sp.I * _p_scale(k)) ** b


def _quantize(f: PhasePolynomial, mode_map, ordering: Ordering) -> LadderPolynomial:
    if f.degree > MAX_DEGREE:
        raise DomainError(f"polynomial degree {f.degree} exceeds the cap {MAX_DEGREE}")
    terms: dict[Word, sp.Expr] = {}
    for powers, c in f.terms.items():
        per_mode = []
        pref = _exact(c)
        for k in range(f.modes):
            a, b = powers[2 * k], powers[2 * k + 1]
            pref = pref * _mode_prefactor(k, a, b)
            per_mode.append(mode_map(a, b).items())
        for combo in itertools.product(*per_mode):
            word = tuple(w for w, _ in combo)
            coeff = pref
            for _, r in combo:
                coeff = coeff * sp.Rational(r.numerator, r.denominator)
            terms[word] = terms.get(word, 0) + coeff
    return LadderPolynomial(f.modes, terms, ordering)


def weyl_quantize(f: PhasePolynomial) -> LadderPolynomial:
    """Weyl map: each q^a p^b becomes the average over all orderings of its factors."""
    return _quantize(f, _weyl_mode, Ordering.SYMMETRIC)


@lru_cache(maxsize=None)
def _berezin_mode(a: int, b: int) -> dict[tuple[int, ...], Fraction]:
    # (α + α*)^a (α* - α)^b with commuting symbols, then a^j a†^k per monomial.
    poly = {(0, 0): 1}
    for form in [_Q_FORM] * a + [_P_FORM] * b:
        nxt: dict[tuple[int, int], int] = {}
        for (j, k), c in poly.items():
            nxt[(j + 1, k)] = nxt.get((j + 1, k), 0) + c * form[A]
            nxt[(j, k + 1)] = nxt.get((j, k + 1), 0) + c * form[ADAG]
        poly = nxt
    return {(A,) * j + (ADAG,) * k: Fraction(c) for (j, k), c in poly.items() if c}


def berezin_quantize(f: PhasePolynomial) -> LadderPolynomial:
    """Anti-Wick map: substitute α, α* and place every a left of every a†."""
    return _quantize(f, _berezin_mode, Ordering.ANTINORMAL)


@lru_cache(maxsize=None)
def _antinormal_word(w: tuple[int, ...]) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Rewrite one single-mode word with a†a = aa† - 1 until anti-normal."""
    for i in range(len(w) - 1):
        if w[i] == ADAG and w[i + 1] == A:
            swapped = w[:i] + (A, ADAG) + w[i + 2 :]
            dropped = w[:i] + w[i + 2 :]
            out: dict[tuple[int, ...], int] = {}
            for sub, c in _antinormal_word(swapped):
                out[sub] = out.get(sub, 0) + c
            for sub, c in _antinormal_word(dropped):
                out[sub] = out.get(sub, 0) - c
            return tuple((k, v) for k, v in out.items() if v)
    return ((w, 1),)


def to_antinormal(op: LadderPolynomial) -> LadderPolynomial:
    terms: dict[Word, sp.Expr] = {}
    for word, c in op.terms.items():
        for combo in itertools.product(*(_antinormal_word(w) for w in word)):
            new = tuple(w for w, _ in combo)
            factor = math.prod(n for _, n in combo)
            terms[new] = terms.get(new, 0) + c * factor
    return LadderPolynomial(op.modes, terms, Ordering.ANTINORMAL)


# -- expectation pipelines ------------------------------------------------


def expectation_trace(rho: DensityOperator, op: LadderPolynomial) -> complex:
    """tr(ρ Â) with Â's matrix computed exactly on the retained levels."""
    return complex(np.trace(rho.matrix @ op.matrix(rho.space)))


def moment_grid(space: ModeSpace, degree: int, step: float = 0.1) -> phasespace.PhaseGrid:
    """Grid wide enough for Q-moments of the given degree."""
    radius = max(phasespace.DEFAULT_RADIUS, 6 + degree / 2)
    samples = 2 * int(math.ceil(radius / step)) + 1
    return phasespace.PhaseGrid(space, radius, samples)


def expectation_via_q(rho: DensityOperator, op: LadderPolynomial, grid=None) -> complex:
    """∫ A(α, α*) Q d²α for an anti-normally ordered operator.

    Each word a^j a†^k is replaced by the c-number α^j α*^k. Operators not
    tagged anti-normal are refused: silently reordering would change the
    answer.
    """
    if op.ordering is not Ordering.ANTINORMAL:
        raise OrderingError(
            f"operator is tagged {op.ordering.value}; bring it to anti-normal order with to_antinormal() first"
        )
    space = rho.space
    if grid is None:
        grid = moment_grid(space, op.degree)
    q = phasespace.q_grid(rho, grid)
    coeffs = op.numeric(space)

    def integrand(pts):
        total = np.zeros(grid.shape, dtype=complex)
        for word, c in coeffs.items():
            term = np.full(grid.shape, c, dtype=complex)
            for k, w in enumerate(word):
                j = w.count(A)
                term = term * pts.alphas[k] ** j * np.conj(pts.alphas[k]) ** (len(w) - j)
            total += term
        return total

    return complex(phasespace.phase_expectation(q, integrand))


def ordering_discrepancy(f: PhasePolynomial, rho: DensityOperator, grid=None) -> float:
    """Weyl/trace expectation minus Berezin/Q expectation of ``f``."""
    weyl = expectation_trace(rho, weyl_quantize(f))
    berezin = expectation_via_q(rho, berezin_quantize(f), grid)
    return float((weyl - berezin).real)


# -- text syntax ----------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?(?P<imag>[ij])?)"
    r"|(?P<unit>[ij])(?![\w'])"
    r"|(?P<sym>[qpa])(?:_?(?P<idx>\d+))?(?:\s*(?P<dag>'))?(?:\s*\^\s*(?P<pow>\d+))?"
    r"|(?P<op>[-+*])"
)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        out.append((m, pos))
        pos = m.end()
    return out


def parse_polynomial(text: str, modes: int | None = None):
    """Parse ``"2.0*q^2*p - 0.5i*q"`` or ``"1*a'*a"``.

    Returns a :class:`PhasePolynomial` for q/p text and an arbitrary-tagged
    :class:`LadderPolynomial` for a/a' text (retagged anti-normal when every
    word already is). Mode indices are written ``q_1``, ``a_1'``.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty polynomial", text, 0)
    i = 0
    terms = []
    kinds = set()
    sign = 1
    while True:
        # optional sign(s) before a term
        while i < len(tokens) and tokens[i][0].group("op") in ("+", "-"):
            if tokens[i][0].group("op") == "-":
                sign = -sign
            i += 1
        coeff, factors = sign, []
        while True:
            if i >= len(tokens):
                raise ParseError("expected a number or symbol", text, len(text))
            m, at = tokens[i]
            if m.group("num"):
                tok = m.group("num")
                if m.group("imag"):
                    coeff = coeff * complex(tok[:-1] + "j")
                elif any(ch in tok for ch in ".eE"):
                    coeff = coeff * float(tok)
                else:
                    coeff = coeff * int(tok)
            elif m.group("unit"):
                coeff = coeff * 1j
            elif m.group("sym"):
                sym, dag = m.group("sym"), bool(m.group("dag"))
                if dag and sym != "a":
                    raise ParseError(f"dagger only applies to 'a', not {sym!r}", text, at)
                kinds.add("ladder" if sym == "a" else "phase")
                factors.append((sym, int(m.group("idx") or 0), dag, int(m.group("pow") or 1)))
            else:
                raise ParseError(f"unexpected operator {m.group('op')!r}", text, at)
            i += 1
            if i < len(tokens) and tokens[i][0].group("op") == "*":
                i += 1
                continue
            break
        terms.append((coeff, factors))
        if i >= len(tokens):
            break
        m, at = tokens[i]
        if m.group("op") not in ("+", "-"):
            raise ParseError("missing '*' or '+' between factors", text, at)
        sign = 1
    if len(kinds) > 1:
        raise ParseError("cannot mix q/p with a/a' in one polynomial", text, 0)
    max_idx = max((f[1] for _, fs in terms for f in fs), default=0)
    modes = modes or max_idx + 1
    if max_idx >= modes:
        raise ParseError(f"mode index {max_idx} out of range for {modes} mode(s)", text, 0)
    if kinds == {"ladder"}:
        total = LadderPolynomial(modes, {})
        for c, fs in terms:
            slots = [[] for _ in range(modes)]
            for _, idx, dag, power in fs:
                slots[idx] += [ADAG if dag else A] * power
            total = total + LadderPolynomial(modes, {tuple(tuple(s) for s in slots): c})
        tag = Ordering.ANTINORMAL if total.words_antinormal() else Ordering.ARBITRARY
        return total.retag(tag)
    total = PhasePolynomial(modes, {})
    for c, fs in terms:
        exps = [0] * (2 * modes)
        for sym, idx, _, power in fs:
            exps[2 * idx + (sym == "p")] += power
        total = total + PhasePolynomial(modes, {tuple(exps): c})
    return total
