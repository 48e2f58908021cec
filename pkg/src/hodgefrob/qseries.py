"""Truncated power series in q_1..q_r with log symbols and a formal tau.

A term is stored under the flat key ``(t, n_1..n_r, m_1..m_r)`` meaning
``tau^t * q^n * ell^m``.  Here ``tau`` is a formal invertible unit standing
for 2*pi*i and ``ell_j`` stands for ``z_j`` with ``q_j = exp(tau * ell_j)``.
Total q-degree is truncated at ``order``; the ell-degree at ``lbound``
when that is set.  Series with ``r = 0`` serve as the coefficient ring
K[tau, 1/tau].
"""

from __future__ import annotations

import cmath
import math
import os
from fractions import Fraction
from itertools import product as iproduct
from operator import add
from typing import Sequence

from .scalars import Gaussian, conj, to_complex

ZERO = Fraction(0)
ONE = Fraction(1)


def default_order() -> int:
    v = os.environ.get("HODGEFROB_ORDER")
    if v:
        try:
            d = int(v)
            if d >= 0:
                return d
        except ValueError:
            pass
    return 6


def _scalar(c):
    if isinstance(c, (Fraction, Gaussian)):
        return c
    return Fraction(c)


class Series:
    __slots__ = ("r", "order", "lbound", "terms", "_items")

    def __init__(self, r: int, order: int, terms: dict | None = None, lbound: int | None = None,
                 _clean: bool = False):
        self.r = r
        self.order = order
        self.lbound = lbound
        self._items = None
        if terms is None:
            self.terms = {}
        elif _clean:
            self.terms = terms
        else:
            t = {}
            for k, c in terms.items():
                if not c:
                    continue
                k = tuple(k)
                if len(k) != 1 + 2 * r:
                    raise ValueError("bad series key length")
                if sum(k[1:1 + r]) > order:
                    continue
                if lbound is not None and sum(k[1 + r:]) > lbound:
                    continue
                if any(x < 0 for x in k[1:]):
                    raise ValueError("negative exponent")
                t[k] = _scalar(c)
            self.terms = t

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls, r: int, order: int, lbound: int | None = None) -> "Series":
        return cls(r, order, {}, lbound, _clean=True)

    @classmethod
    def const(cls, c, r: int, order: int, tau: int = 0, lbound: int | None = None) -> "Series":
        c = _scalar(c)
        if not c:
            return cls.zero(r, order, lbound)
        return cls(r, order, {(tau,) + (0,) * (2 * r): c}, lbound, _clean=True)

    @classmethod
    def monomial(cls, r: int, order: int, q: Sequence[int] = (), ell: Sequence[int] = (), tau: int = 0,
                 c=1, lbound: int | None = None) -> "Series":
        q = tuple(q) + (0,) * (r - len(q))
        ell = tuple(ell) + (0,) * (r - len(ell))
        return cls(r, order, {(tau,) + q + ell: c}, lbound)

    @classmethod
    def q(cls, j: int, r: int, order: int, lbound: int | None = None) -> "Series":
        e = [0] * r
        e[j] = 1
        return cls.monomial(r, order, q=e, lbound=lbound)

    @classmethod
    def ell(cls, j: int, r: int, order: int, lbound: int | None = None) -> "Series":
        e = [0] * r
        e[j] = 1
        return cls.monomial(r, order, ell=e, lbound=lbound)

    def like(self, terms: dict, clean: bool = True) -> "Series":
        return Series(self.r, self.order, terms, self.lbound, _clean=clean)

    def _compat(self, other: "Series"):
        if other.r != self.r:
            raise ValueError(f"series in {self.r} vs {other.r} variables")

    def _combine_bounds(self, other: "Series"):
        order = min(self.order, other.order)
        if self.lbound is None:
            lb = other.lbound
        elif other.lbound is None:
            lb = self.lbound
        else:
            lb = min(self.lbound, other.lbound)
        return order, lb

    # basic queries -----------------------------------------------------
    def __bool__(self):
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, Series):
            return self.r == other.r and self.terms == other.terms
        if isinstance(other, (int, Fraction, Gaussian)):
            return self == Series.const(other, self.r, self.order)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def items(self):
        if self._items is None:
            r = self.r
            self._items = [(k, c, sum(k[1:1 + r]), sum(k[1 + r:])) for k, c in self.terms.items()]
        return self._items

    def qdeg_min(self) -> int | None:
        if not self.terms:
            return None
        return min(it[2] for it in self.items())

    def has_logs(self) -> bool:
        r = self.r
        return any(any(k[1 + r:]) for k in self.terms)

    def tau_powers(self) -> set[int]:
        return {k[0] for k in self.terms}

    def qexps(self) -> set[tuple]:
        r = self.r
        return {k[1:1 + r] for k in self.terms}

    def coeff(self, q: Sequence[int] = (), ell: Sequence[int] = (), tau: int = 0):
        r = self.r
        q = tuple(q) + (0,) * (r - len(q))
        ell = tuple(ell) + (0,) * (r - len(ell))
        return self.terms.get((tau,) + q + ell, ZERO)

    def q_part(self, qexp: Sequence[int]) -> "Series":
        """Coefficient of q^qexp as a series in tau (and ell), in the same ring."""
        r = self.r
        qexp = tuple(qexp)
        zero_q = (0,) * r
        out = {}
        for k, c in self.terms.items():
            if k[1:1 + r] == qexp:
                out[(k[0],) + zero_q + k[1 + r:]] = c
        return self.like(out)

    def q_graded(self) -> dict[tuple, dict]:
        """q-exponent -> {(t, ell-exponent): coeff}."""
        r = self.r
        out: dict[tuple, dict] = {}
        for k, c in self.terms.items():
            out.setdefault(k[1:1 + r], {})[(k[0],) + k[1 + r:]] = c
        return out

    def constant_term(self) -> "Series":
        return self.q_part((0,) * self.r)

    def scalar_value(self):
        """The value of a series that is a plain scalar (tau^0, no q, no ell)."""
        if not self.terms:
            return ZERO
        z = (0,) * (1 + 2 * self.r)
        if set(self.terms) != {z}:
            raise ValueError("series is not a plain scalar")
        return self.terms[z]

    def lowest_order_terms(self) -> tuple[int | None, dict]:
        d = self.qdeg_min()
        if d is None:
            return None, {}
        return d, {k: c for k, c, qd, _ in self.items() if qd == d}

    # arithmetic --------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Series):
            other = Series.const(other, self.r, self.order, lbound=self.lbound)
        self._compat(other)
        order, lb = self._combine_bounds(other)
        if not other.terms and order == self.order and lb == self.lbound:
            return self
        t = dict(self.terms) if order == self.order else {
            k: c for k, c, qd, _ in self.items() if qd <= order}
        r = self.r
        for k, c in other.terms.items():
            if sum(k[1:1 + r]) > order:
                continue
            v = t.get(k)
            if v is None:
                t[k] = c
            else:
                v = v + c
                if v:
                    t[k] = v
                else:
                    del t[k]
        return Series(r, order, t, lb, _clean=True)

    __radd__ = __add__

    def __neg__(self):
        return self.like({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Series):
            other = Series.const(other, self.r, self.order, lbound=self.lbound)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "Series":
        if isinstance(c, Series):
            return self * c
        if not c:
            return self.like({})
        if c == 1:
            return self
        return self.like({k: c * v for k, v in self.terms.items()})

    def tau_shift(self, t: int) -> "Series":
        if not t:
            return self
        return self.like({(k[0] + t,) + k[1:]: c for k, c in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, Series):
            return self.scale(_scalar(other))
        self._compat(other)
        order, lb = self._combine_bounds(other)
        a, b = self.items(), other.items()
        if not a or not b:
            return Series(self.r, order, {}, lb, _clean=True)
        if len(a) > len(b):
            a, b = b, a
        out: dict = {}
        get = out.get
        if lb is None:
            for ka, ca, da, _ in a:
                room = order - da
                if room < 0:
                    continue
                for kb, cb, db, _ in b:
                    if db > room:
                        continue
                    k = tuple(map(add, ka, kb))
                    v = get(k)
                    out[k] = ca * cb if v is None else v + ca * cb
        else:
            for ka, ca, da, la in a:
                room = order - da
                lroom = lb - la
                if room < 0 or lroom < 0:
                    continue
                for kb, cb, db, lb2 in b:
                    if db > room or lb2 > lroom:
                        continue
                    k = tuple(map(add, ka, kb))
                    v = get(k)
                    out[k] = ca * cb if v is None else v + ca * cb
        return Series(self.r, order, {k: c for k, c in out.items() if c}, lb, _clean=True)

    def __rmul__(self, other):
        return self.scale(_scalar(other))

    def __pow__(self, e: int) -> "Series":
        if e < 0:
            return self.inverse() ** (-e)
        out = Series.const(1, self.r, self.order, lbound=self.lbound)
        for _ in range(e):
            out = out * self
        return out

    def conj(self) -> "Series":
        """Complex conjugation: i -> -i and tau -> -tau."""
        return self.like({k: (conj(c) if k[0] % 2 == 0 else -conj(c)) for k, c in self.terms.items()})

    def with_order(self, order: int) -> "Series":
        return Series(self.r, order, {k: c for k, c, qd, _ in self.items() if qd <= order}, self.lbound,
                      _clean=True)

    def with_lbound(self, lbound: int | None) -> "Series":
        if lbound is None:
            return Series(self.r, self.order, self.terms, None, _clean=True)
        return Series(self.r, self.order, {k: c for k, c, _, ld in self.items() if ld <= lbound}, lbound,
                      _clean=True)

    def embed(self, r: int, positions: Sequence[int] | None = None) -> "Series":
        """View as a series in r >= self.r variables (variables placed at ``positions``)."""
        pos = list(positions) if positions is not None else list(range(self.r))
        out = {}
        sr = self.r
        for k, c in self.terms.items():
            q = [0] * r
            l = [0] * r
            for i, p in enumerate(pos):
                q[p] = k[1 + i]
                l[p] = k[1 + sr + i]
            out[(k[0],) + tuple(q) + tuple(l)] = c
        return Series(r, self.order, out, self.lbound, _clean=True)

    # derivations -------------------------------------------------------
    def theta(self, j: int) -> "Series":
        """q_j d/dq_j."""
        i = 1 + j
        return self.like({k: c * k[i] for k, c in self.terms.items() if k[i]})

    def d_ell(self, j: int) -> "Series":
        """d/d ell_j."""
        i = 1 + self.r + j
        out = {}
        for k, c in self.terms.items():
            m = k[i]
            if m:
                kk = list(k)
                kk[i] = m - 1
                out[tuple(kk)] = c * m
        return self.like(out)

    def derive_z(self, j: int) -> "Series":
        """d/dz_j = d/d ell_j + tau q_j d/dq_j."""
        if not 0 <= j < self.r:
            raise IndexError(f"variable {j} out of range")
        i = 1 + j
        out = dict(self.d_ell(j).terms)
        for k, c in self.terms.items():
            if k[i]:
                kk = (k[0] + 1,) + k[1:]
                v = out.get(kk, ZERO) + c * k[i]
                if v:
                    out[kk] = v
                else:
                    out.pop(kk, None)
        return self.like(out)

    def d_q(self, j: int) -> "Series":
        """Plain d/dq_j; the order drops by one."""
        i = 1 + j
        out = {}
        for k, c in self.terms.items():
            m = k[i]
            if m:
                kk = list(k)
                kk[i] = m - 1
                out[tuple(kk)] = c * m
        return Series(self.r, max(self.order - 1, 0), out, self.lbound, _clean=True)

    def times_q(self, j: int, power: int = 1) -> "Series":
        i = 1 + j
        out = {}
        for k, c in self.terms.items():
            kk = list(k)
            kk[i] += power
            out[tuple(kk)] = c
        return Series(self.r, self.order, out, self.lbound)

    def divide_q(self, j: int) -> "Series":
        """Exact division by q_j (every term must contain q_j)."""
        i = 1 + j
        out = {}
        for k, c in self.terms.items():
            if not k[i]:
                raise ValueError("series not divisible by q_j")
            kk = list(k)
            kk[i] -= 1
            out[tuple(kk)] = c
        return self.like(out)

    # inverse, exp, log of scalar series -------------------------------
    def inverse(self) -> "Series":
        c0 = self.q_part((0,) * self.r)
        zero_l = all(not any(k[1 + self.r:]) for k in c0.terms)
        if len(c0.terms) != 1 or not zero_l:
            raise ValueError("series is not a unit (constant term is not a monomial in tau)")
        (k0, a0), = c0.terms.items()
        inv0 = Series(self.r, self.order, {(-k0[0],) + k0[1:]: 1 / a0}, self.lbound, _clean=True)
        x = self * inv0 - 1  # topologically nilpotent
        out = Series.const(1, self.r, self.order, lbound=self.lbound)
        p = Series.const(1, self.r, self.order, lbound=self.lbound)
        bound = self.order + (self.lbound or 0) + 1
        for _ in range(bound):
            p = p * (-x)
            if not p:
                break
            out = out + p
        return out * inv0

    def is_unit(self) -> bool:
        c0 = self.q_part((0,) * self.r)
        return len(c0.terms) == 1 and not any(any(k[1 + self.r:]) for k in c0.terms)

    def exp(self) -> "Series":
        """exp of a series with zero constant term."""
        if self.q_part((0,) * self.r):
            raise ValueError("exp needs zero constant term")
        out = Series.const(1, self.r, self.order, lbound=self.lbound)
        p = out
        for n in range(1, self.order + 1):
            p = p * self * Fraction(1, n)
            if not p:
                break
            out = out + p
        return out

    def log1p_unit(self) -> "Series":
        """log of a series with constant term 1."""
        c0 = self.q_part((0,) * self.r)
        if c0 != Series.const(1, self.r, self.order):
            raise ValueError("log needs constant term 1")
        x = self - 1
        out = Series.zero(self.r, self.order, self.lbound)
        p = Series.const(1, self.r, self.order, lbound=self.lbound)
        for n in range(1, self.order + 1):
            p = p * x
            if not p:
                break
            out = out + p * Fraction((-1) ** (n + 1), n)
        return out

    # substitution and evaluation --------------------------------------
    def subs_q(self, us: Sequence["Series"]) -> "Series":
        """Substitute q_j -> us[j]; each us[j] must have zero constant term."""
        r = self.r
        if len(us) != r:
            raise ValueError("need one substitute per variable")
        for u in us:
            if u.q_part((0,) * r):
                raise ValueError("substitute must vanish at q = 0")
        powers: list[dict[int, Series]] = [{0: Series.const(1, r, self.order, lbound=self.lbound)} for _ in us]

        def pw(j, e):
            d = powers[j]
            while e not in d:
                m = max(d)
                d[m + 1] = d[m] * us[j]
            return d[e]

        out = Series.zero(r, self.order, self.lbound)
        zq = (0,) * r
        for k, c in self.terms.items():
            term = Series(r, self.order, {(k[0],) + zq + k[1 + r:]: c}, self.lbound, _clean=True)
            for j in range(r):
                if k[1 + j]:
                    term = term * pw(j, k[1 + j])
            out = out + term
        return out

    def evaluate(self, q: Sequence[complex], ell: Sequence[complex] | None = None,
                 tau: complex = 2j * math.pi) -> complex:
        """Floating evaluation; ell defaults to log(q)/tau on the principal branch."""
        r = self.r
        q = [complex(x) for x in q]
        if ell is None:
            ell = [cmath.log(x) / tau if x != 0 else 0j for x in q] if self.has_logs() else [0j] * r
        total = 0j
        for k, c in self.terms.items():
            v = to_complex(c) * tau ** k[0]
            for j in range(r):
                if k[1 + j]:
                    v *= q[j] ** k[1 + j]
                if k[1 + r + j]:
                    v *= ell[j] ** k[1 + r + j]
            total += v
        return total

    def set_ell_zero(self) -> "Series":
        r = self.r
        return self.like({k: c for k, c in self.terms.items() if not any(k[1 + r:])})

    def subs_ell(self, values: Sequence) -> "Series":
        """Substitute exact scalars for the ell symbols."""
        r = self.r
        out: dict = {}
        zl = (0,) * r
        for k, c in self.terms.items():
            v = c
            for j in range(r):
                if k[1 + r + j]:
                    v = v * _scalar(values[j]) ** k[1 + r + j]
            kk = k[:1 + r] + zl
            out[kk] = out.get(kk, ZERO) + v
        return self.like({k: c for k, c in out.items() if c})

    def __repr__(self):
        return f"Series({to_string(self)})"


def to_string(s: Series) -> str:
    from .scalars import fmt
    if not s.terms:
        return "0"
    r = s.r
    parts = []
    for k in sorted(s.terms, key=lambda k: (sum(k[1:1 + r]), k[1:], k[0])):
        c = s.terms[k]
        mon = []
        if k[0]:
            mon.append("tau" if k[0] == 1 else f"tau^{k[0]}")
        for j in range(r):
            e = k[1 + j]
            if e:
                mon.append(f"q{j + 1}" if e == 1 else f"q{j + 1}^{e}")
        for j in range(r):
            e = k[1 + r + j]
            if e:
                mon.append(f"l{j + 1}" if e == 1 else f"l{j + 1}^{e}")
        cs = fmt(c)
        if isinstance(c, Gaussian):
            cs = f"({cs})"
        if mon and c == 1:
            parts.append("*".join(mon))
        elif mon and c == -1:
            parts.append("-" + "*".join(mon))
        else:
            parts.append("*".join([cs] + mon) if mon else cs)
    return " + ".join(parts)


def monomials(r: int, D: int, mindeg: int = 0) -> list[tuple]:
    """All exponent vectors of total degree in [mindeg, D], by degree."""
    out = [e for e in iproduct(range(D + 1), repeat=r) if mindeg <= sum(e) <= D]
    out.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    return out


# ----------------------------------------------------------------------
# matrix-valued series
# ----------------------------------------------------------------------

class NotNilpotent(ValueError):
    pass


class MatSeries:
    """Square matrix of Series stored sparsely as {(row, col): Series}."""

    __slots__ = ("n", "r", "order", "lbound", "entries")

    def __init__(self, n: int, r: int, order: int, entries: dict | None = None, lbound: int | None = None):
        self.n = n
        self.r = r
        self.order = order
        self.lbound = lbound
        self.entries = {k: v for k, v in (entries or {}).items() if v}

    @classmethod
    def zero(cls, n, r, order, lbound=None) -> "MatSeries":
        return cls(n, r, order, {}, lbound)

    @classmethod
    def identity(cls, n, r, order, lbound=None) -> "MatSeries":
        return cls(n, r, order, {(i, i): Series.const(1, r, order, lbound=lbound) for i in range(n)}, lbound)

    @classmethod
    def from_matrix(cls, M, r, order, tau: int = 0, lbound=None) -> "MatSeries":
        n = len(M)
        ent = {}
        for i in range(n):
            for j in range(n):
                if M[i][j]:
                    ent[(i, j)] = Series.const(M[i][j], r, order, tau=tau, lbound=lbound)
        return cls(n, r, order, ent, lbound)

    def like(self, entries: dict) -> "MatSeries":
        return MatSeries(self.n, self.r, self.order, entries, self.lbound)

    def __getitem__(self, ij) -> Series:
        s = self.entries.get(ij)
        if s is None:
            return Series.zero(self.r, self.order, self.lbound)
        return s

    def __bool__(self):
        return bool(self.entries)

    def is_zero(self) -> bool:
        return not self.entries

    def __eq__(self, other):
        return isinstance(other, MatSeries) and self.n == other.n and self.entries == other.entries

    def __add__(self, other: "MatSeries") -> "MatSeries":
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out[k] + v if k in out else v
        return self.like(out)

    def __neg__(self):
        return self.like({k: -v for k, v in self.entries.items()})

    def __sub__(self, other: "MatSeries") -> "MatSeries":
        return self + (-other)

    def scale(self, c) -> "MatSeries":
        return self.like({k: v * c for k, v in self.entries.items()})

    def map(self, f) -> "MatSeries":
        return self.like({k: f(v) for k, v in self.entries.items()})

    def __mul__(self, other):
        if not isinstance(other, MatSeries):
            return self.scale(other)
        rows: dict[int, list] = {}
        for (j, k), v in other.entries.items():
            rows.setdefault(j, []).append((k, v))
        out: dict = {}
        for (i, j), a in self.entries.items():
            for k, b in rows.get(j, ()):
                p = a * b
                if not p:
                    continue
                key = (i, k)
                out[key] = out[key] + p if key in out else p
        order = min(self.order, other.order)
        lb = self.lbound if other.lbound is None else (
            other.lbound if self.lbound is None else min(self.lbound, other.lbound))
        return MatSeries(self.n, self.r, order, out, lb)

    def commutator(self, other: "MatSeries") -> "MatSeries":
        return self * other - other * self

    def transpose(self) -> "MatSeries":
        return self.like({(j, i): v for (i, j), v in self.entries.items()})

    def conj(self) -> "MatSeries":
        return self.map(Series.conj)

    def apply(self, vec: Sequence[Series]) -> list[Series]:
        out = [Series.zero(self.r, self.order, self.lbound) for _ in range(self.n)]
        for (i, j), v in self.entries.items():
            if vec[j]:
                out[i] = out[i] + v * vec[j]
        return out

    def column(self, j: int) -> list[Series]:
        return [self[(i, j)] for i in range(self.n)]

    def q_part(self, qexp) -> "MatSeries":
        return self.like({k: v.q_part(qexp) for k, v in self.entries.items()})

    def constant_matrix(self):
        """The q^0, ell^0, tau^0 part as an exact matrix (other tau powers must be absent)."""
        M = [[ZERO] * self.n for _ in range(self.n)]
        for (i, j), v in self.entries.items():
            c = v.q_part((0,) * self.r).set_ell_zero()
            if c:
                M[i][j] = c.scalar_value()
        return M

    def derive_z(self, j: int) -> "MatSeries":
        return self.map(lambda s: s.derive_z(j))

    def theta(self, j: int) -> "MatSeries":
        return self.map(lambda s: s.theta(j))

    def with_order(self, order: int) -> "MatSeries":
        return MatSeries(self.n, self.r, order, {k: v.with_order(order) for k, v in self.entries.items()},
                         self.lbound)

    def with_lbound(self, lbound) -> "MatSeries":
        return MatSeries(self.n, self.r, self.order, {k: v.with_lbound(lbound) for k, v in self.entries.items()},
                         lbound)

    def set_ell_zero(self) -> "MatSeries":
        return self.map(Series.set_ell_zero)

    def subs_q(self, us) -> "MatSeries":
        return self.map(lambda s: s.subs_q(us))

    def subs_ell(self, values) -> "MatSeries":
        return self.map(lambda s: s.subs_ell(values))

    def has_logs(self) -> bool:
        return any(v.has_logs() for v in self.entries.values())

    def power(self, e: int) -> "MatSeries":
        out = MatSeries.identity(self.n, self.r, self.order, self.lbound)
        for _ in range(e):
            out = out * self
        return out

    def evaluate(self, q, ell=None, tau: complex = 2j * math.pi):
        import numpy as np
        M = np.zeros((self.n, self.n), dtype=complex)
        for (i, j), v in self.entries.items():
            M[i, j] = v.evaluate(q, ell, tau)
        return M

    def first_nonzero_order(self) -> int | None:
        ds = [v.qdeg_min() for v in self.entries.values()]
        return min(ds) if ds else None

    def __repr__(self):
        return f"MatSeries(n={self.n}, nnz={len(self.entries)})"


def _power_bound(A: MatSeries) -> int:
    # a nilpotent constant part plus q-adically small terms: A^bound vanishes at truncation
    return A.n * (A.order + 1 + (A.lbound or 0))


def exp_nilpotent(A: MatSeries) -> MatSeries:
    """exp(A) when some power of A vanishes at truncation (verified)."""
    n = _power_bound(A)
    out = MatSeries.identity(A.n, A.r, A.order, A.lbound)
    p = out
    for k in range(1, n + 1):
        p = (p * A).scale(Fraction(1, k))
        if not p:
            return out
        if k == n:
            break
        out = out + p
    raise NotNilpotent("matrix series is not nilpotent (A^n != 0)")


def log_unipotent(U: MatSeries) -> MatSeries:
    """log(U) when some power of U - I vanishes at truncation (verified)."""
    X = U - MatSeries.identity(U.n, U.r, U.order, U.lbound)
    n = _power_bound(X)
    out = MatSeries.zero(U.n, U.r, U.order, U.lbound)
    p = MatSeries.identity(U.n, U.r, U.order, U.lbound)
    for k in range(1, n + 1):
        p = p * X
        if not p:
            return out
        if k == n:
            break
        out = out + p.scale(Fraction((-1) ** (k + 1), k))
    raise NotNilpotent("U - I is not nilpotent")


def inverse_unipotent(U: MatSeries) -> MatSeries:
    """U^{-1} = sum (I - U)^k for U - I nilpotent at truncation."""
    Y = MatSeries.identity(U.n, U.r, U.order, U.lbound) - U
    n = _power_bound(Y)
    out = MatSeries.identity(U.n, U.r, U.order, U.lbound)
    p = out
    for _ in range(n):
        p = p * Y
        if not p:
            return out
        out = out + p
    raise NotNilpotent("U - I is not nilpotent")


def series_det(M: list[list[Series]]) -> Series:
    """Determinant by elimination with unit pivots (falls back to expansion)."""
    n = len(M)
    if n == 0:
        raise ValueError("empty matrix")
    A = [list(row) for row in M]
    r, order, lb = A[0][0].r, A[0][0].order, A[0][0].lbound
    d = Series.const(1, r, order, lbound=lb)
    for c in range(n):
        p = next((i for i in range(c, n) if A[i][c].is_unit()), None)
        if p is None:
            return d * _det_expand([row[c:] for row in A[c:]])
        if p != c:
            A[c], A[p] = A[p], A[c]
            d = -d
        piv = A[c][c]
        d = d * piv
        inv = piv.inverse()
        for i in range(c + 1, n):
            if A[i][c]:
                f = A[i][c] * inv
                A[i] = [x - f * y if y else x for x, y in zip(A[i], A[c])]
    return d


def _det_expand(M):
    n = len(M)
    if n == 1:
        return M[0][0]
    total = None
    for j in range(n):
        if not M[0][j]:
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        t = M[0][j] * _det_expand(minor)
        if j % 2:
            t = -t
        total = t if total is None else total + t
    if total is None:
        return Series.zero(M[0][0].r, M[0][0].order, M[0][0].lbound)
    return total


def invert_coordinate_change(fs: Sequence[Series]) -> list[Series]:
    """Given q~_j = q_j f_j(q) with f_j(0) = 1, return q_j as series in q~."""
    r = len(fs)
    order = fs[0].order
    qs = [Series.q(j, r, order) for j in range(r)]
    cur = list(qs)
    inv_f = [f.inverse() for f in fs]
    for _ in range(order + 1):
        cur = [qs[j] * inv_f[j].subs_q(cur) for j in range(r)]
    return cur
