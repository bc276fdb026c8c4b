"""Wigner 3j symbols, Clebsch-Gordan coefficients and Gaunt integrals.

The production path is the Racah single sum with log-factorials and a term
ratio recurrence (l <= 100). When the alternating sum cancels by more than a
factor 50 the symbol is recomputed from the exact rational sum, which is also
the test oracle.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ArgumentError, RangeError

L_MAX = 100
_LOGFACT = np.array([math.log(math.factorial(n)) for n in range(4 * L_MAX + 4)])


@dataclass(frozen=True)
class Wigner3jIndex:
    l1: int
    l2: int
    l3: int
    m1: int
    m2: int
    m3: int

    def __post_init__(self):
        for l, m in ((self.l1, self.m1), (self.l2, self.m2), (self.l3, self.m3)):
            if l < 0 or abs(m) > l:
                raise ArgumentError(f"invalid (l, m) = ({l}, {m})")


def _triangle(l1, l2, l3):
    return abs(l1 - l2) <= l3 <= l1 + l2


def _as_tuple(idx):
    if isinstance(idx, Wigner3jIndex):
        return idx.l1, idx.l2, idx.l3, idx.m1, idx.m2, idx.m3
    Wigner3jIndex(*idx)
    return tuple(int(v) for v in idx)


def _zero(l1, l2, l3, m1, m2, m3):
    if m1 + m2 + m3 != 0 or not _triangle(l1, l2, l3):
        return True
    if m1 == 0 and m2 == 0 and m3 == 0 and (l1 + l2 + l3) % 2:
        return True
    return False


@lru_cache(maxsize=65536)
def _w3j(l1, l2, l3, m1, m2, m3):
    if _zero(l1, l2, l3, m1, m2, m3):
        return 0.0
    lf = _LOGFACT
    tri = 0.5 * (lf[l1 + l2 - l3] + lf[l1 - l2 + l3] + lf[-l1 + l2 + l3] - lf[l1 + l2 + l3 + 1])
    pre = 0.5 * (lf[l1 + m1] + lf[l1 - m1] + lf[l2 + m2] + lf[l2 - m2] + lf[l3 + m3] + lf[l3 - m3])
    kmin = max(0, l2 - l3 - m1, l1 - l3 + m2)
    kmax = min(l1 + l2 - l3, l1 - m1, l2 + m2)
    a1, a2, a3 = l1 + l2 - l3, l1 - m1, l2 + m2
    b1, b2 = l3 - l2 + m1, l3 - l1 - m2
    # terms relative to the first one via the exact ratio recurrence
    terms = [1.0]
    t = 1.0
    for k in range(kmin, kmax):
        t *= -((a1 - k) * (a2 - k) * (a3 - k)) / ((k + 1.0) * (b1 + k + 1.0) * (b2 + k + 1.0))
        terms.append(t)
    lt = -(lf[kmin] + lf[a1 - kmin] + lf[a2 - kmin] + lf[a3 - kmin] + lf[b1 + kmin] + lf[b2 + kmin])
    first = (-1.0 if kmin % 2 else 1.0) * math.exp(lt + tri + pre)
    total = math.fsum(terms)
    # alternating sum: fall back to exact integers when cancellation is severe
    if total == 0.0 or math.fsum(abs(v) for v in terms) > 50.0 * abs(total):
        return wigner_3j_exact_float((l1, l2, l3, m1, m2, m3))
    sign = -1.0 if (l1 - l2 - m3) % 2 else 1.0
    return sign * first * total


def wigner_3j(idx):
    """Wigner 3j symbol (l1 l2 l3; m1 m2 m3); 0 when selection rules fail."""
    t = _as_tuple(idx)
    if max(t[:3]) > L_MAX:
        raise RangeError(f"degree above {L_MAX} not supported by the floating path")
    return _w3j(*t)


def clebsch_gordan(idx):
    """C^{l3 m3}_{l1 m1 l2 m2}; m3 is the coupled projection."""
    l1, l2, l3, m1, m2, m3 = _as_tuple(idx)
    if m1 + m2 != m3:
        return 0.0
    sign = -1.0 if (l1 - l2 + m3) % 2 else 1.0
    return sign * math.sqrt(2 * l3 + 1) * wigner_3j((l1, l2, l3, m1, m2, -m3))


def gaunt_integral(l1, m1, l2, m2, l3, m3):
    """Integral of Y_{l1m1} Y_{l2m2} Y_{l3m3} over the sphere."""
    a = wigner_3j((l1, l2, l3, 0, 0, 0))
    if a == 0.0:
        return 0.0
    b = wigner_3j((l1, l2, l3, m1, m2, m3))
    return math.sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1) / (4.0 * math.pi)) * a * b


# exact oracle -------------------------------------------------------------

def wigner_3j_exact(idx):
    """Exact 3j as (sign, Fraction squared magnitude); value = sign*sqrt(q).

    Clebsch-Gordan single sum over rationals, converted with
    3j = (-1)^(l1-l2-m3) / sqrt(2 l3 + 1) * C^{l3,-m3}_{l1 m1 l2 m2}.
    """
    l1, l2, l3, m1, m2, m3 = _as_tuple(idx)
    if _zero(l1, l2, l3, m1, m2, m3):
        return 0, Fraction(0)
    f = math.factorial
    M = -m3
    pref = Fraction((2 * l3 + 1) * f(l3 + l1 - l2) * f(l3 - l1 + l2) * f(l1 + l2 - l3),
                    f(l1 + l2 + l3 + 1))
    pref *= f(l3 + M) * f(l3 - M) * f(l1 - m1) * f(l1 + m1) * f(l2 - m2) * f(l2 + m2)
    s = Fraction(0)
    for k in range(0, l1 + l2 + l3 + 1):
        args = (l1 + l2 - l3 - k, l1 - m1 - k, l2 + m2 - k, l3 - l2 + m1 + k, l3 - l1 - m2 + k)
        if k < 0 or min(args) < 0:
            continue
        den = f(k)
        for a in args:
            den *= f(a)
        s += Fraction((-1) ** k, den)
    # C = sqrt(pref) * s ; 3j = sign / sqrt(2l3+1) * C
    if s == 0:
        return 0, Fraction(0)
    sign = (1 if s > 0 else -1) * (-1) ** ((l1 - l2 - m3) % 2)
    return sign, pref * s * s / (2 * l3 + 1)


def wigner_3j_exact_float(idx):
    """Correctly rounded float of the exact value."""
    sign, q = wigner_3j_exact(idx)
    return sign * math.sqrt(q)


# orthogonality sums -------------------------------------------------------

def orthogonality_sum(kind, **kw):
    """Left-hand sides of the 3j orthogonality identities.

    orth1(l1,l2,l,lp,m,mp): sum_{m1,m2} 3j(l1 l2 l; m1 m2 m) 3j(l1 l2 lp; m1 m2 mp)
                            = delta_{l lp} delta_{m mp} / (2l+1)
    orth2(gamma,kappa,l):   sum_m (-1)^(l-m) 3j(l l gamma; m -m kappa) = sqrt(2l+1) delta_{gamma 0} delta_{kappa 0}
    orth3(l1,l2,m1,m2,M1,M2): sum_{l,m} (2l+1) 3j(l1 l2 l; m1 m2 m) 3j(l1 l2 l; M1 M2 m) = delta delta
    orth4(l1,l2,l3):        sum_{m1,m2,m3} 3j(l1 l2 l3; m1 m2 m3)^2 = 1 (triangle satisfied)
    """
    if kind == "orth1":
        l1, l2, l, lp, m, mp = (kw[k] for k in ("l1", "l2", "l", "lp", "m", "mp"))
        tot = 0.0
        for m1 in range(-l1, l1 + 1):
            for m2 in range(-l2, l2 + 1):
                if abs(m) > l or abs(mp) > lp:
                    continue
                tot += wigner_3j((l1, l2, l, m1, m2, m)) * wigner_3j((l1, l2, lp, m1, m2, mp))
        return tot
    if kind == "orth2":
        g, kap, l = kw["gamma"], kw["kappa"], kw["l"]
        return sum((-1) ** ((l - m) % 2) * wigner_3j((l, l, g, m, -m, kap))
                   for m in range(-l, l + 1) if abs(kap) <= g)
    if kind == "orth3":
        l1, l2, m1, m2, M1, M2 = (kw[k] for k in ("l1", "l2", "m1", "m2", "M1", "M2"))
        tot = 0.0
        for l in range(abs(l1 - l2), l1 + l2 + 1):
            for m in range(-l, l + 1):
                tot += (2 * l + 1) * wigner_3j((l1, l2, l, m1, m2, m)) * wigner_3j((l1, l2, l, M1, M2, m))
        return tot
    if kind == "orth4":
        l1, l2, l3 = kw["l1"], kw["l2"], kw["l3"]
        tot = 0.0
        for m1 in range(-l1, l1 + 1):
            for m2 in range(-l2, l2 + 1):
                m3 = -m1 - m2
                if abs(m3) <= l3:
                    tot += wigner_3j((l1, l2, l3, m1, m2, m3)) ** 2
        return tot
    raise ArgumentError(f"unknown orthogonality identity {kind!r}")
