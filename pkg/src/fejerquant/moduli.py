"""Exact arithmetic for quantitative moduli.

Everything in this module is integer/rational arithmetic: arbitrary-precision
``int`` for indices and bounds, ``fractions.Fraction`` for the few certified
real upper bounds (e^A, sqrt(d)) that enter ceiling expressions. No floats,
so every computed bound is reproducible and sound by construction.

The combinators at the bottom (``chi`` through ``psi_prime``, ``kappa``,
``kappa_hat``) assemble the uniform quantitative data of the resolvent
iteration: residual-search moduli, metastability rates and the index bounds
they are built from. They treat their modulus arguments as black boxes
``N -> N`` (or ``N x N -> N`` for the residual-search modulus ``phi``).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .errors import (
    InvariantViolation,
    NegativeExponent,
    TableRangeError,
)

#: Default cap for symbolic bounds: values above this become Overflow markers.
DEFAULT_CAP = 10 ** 10000

# Bounds just below the cap have ~10000 digits; make sure they can be
# serialized (CPython limits int -> str conversion to 4300 digits by default).
if sys.get_int_max_str_digits() < 20_000:
    sys.set_int_max_str_digits(20_000)

#: Granularity used when rounding certified rational upper bounds.
_EXP_GRAIN = 10 ** 9
_SQRT_GRAIN = 10 ** 7


def bounded_sub(n: int, m: int) -> int:
    """Truncated subtraction on naturals: max(n - m, 0)."""
    if n < 0 or m < 0:
        raise ValueError("bounded_sub is defined on naturals")
    return n - m if n > m else 0


def ceil_fraction(q: Fraction) -> int:
    """Exact ceiling of a rational."""
    return -((-q.numerator) // q.denominator)


def ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _iroot(x: int, p: int) -> int:
    """Exact floor(x ** (1/p)) for naturals, Newton iteration on integers."""
    if x < 0 or p < 1:
        raise ValueError("_iroot needs x >= 0, p >= 1")
    if p == 1 or x in (0, 1):
        return x
    r = 1 << ceil_div(x.bit_length(), p)
    while True:
        nr = ((p - 1) * r + x // r ** (p - 1)) // p
        if nr >= r:
            break
        r = nr
    while r ** p > x:
        r -= 1
    while (r + 1) ** p <= x:
        r += 1
    return r


def ceil_nth_root(q: Fraction, p: int) -> int:
    """Smallest natural t with t**p >= q (exact)."""
    if p < 1:
        raise ValueError("root order must be >= 1")
    if q <= 0:
        return 0
    t = _iroot(ceil_fraction(q), p)
    num, den = q.numerator, q.denominator
    while t ** p * den < num:
        t += 1
    while t >= 1 and (t - 1) ** p * den >= num:
        t -= 1
    return t


# --------------------------------------------------------------------------
# certified rational upper bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalUpper:
    """A certified rational upper bound on a real quantity.

    ``value`` satisfies  quantity <= value < quantity + error_bound.
    """

    value: Fraction
    quantity: str
    error_bound: Fraction

    def __float__(self) -> float:
        return float(self.value)


def exp_upper(a: Fraction) -> RationalUpper:
    """Rational u with e^a <= u < e^a + 1e-6, by Taylor series with an
    explicit geometric remainder bound, rounded up to denominator 1e9."""
    a = Fraction(a)
    if a < 0:
        raise NegativeExponent(f"exp_upper needs a >= 0, got {a}")
    if a == 0:
        return RationalUpper(Fraction(1), "e^0", Fraction(0))
    term = Fraction(1)
    total = Fraction(1)
    i = 0
    while True:
        i += 1
        term *= a / i
        total += term
        # remainder sum_{j>i} a^j/j! <= term * q/(1-q) with q = a/(i+1) < 1
        if a < i + 1:
            qr = a / (i + 1)
            tail = term * qr / (1 - qr)
            if tail < Fraction(1, 10 ** 7):
                break
    u = Fraction(ceil_fraction((total + tail) * _EXP_GRAIN), _EXP_GRAIN)
    return RationalUpper(u, f"e^{a}", Fraction(1, 10 ** 6))


def sqrt_upper(d: int) -> RationalUpper:
    """Rational u with sqrt(d) <= u < sqrt(d) + 1e-6; exact on perfect squares."""
    if d < 0:
        raise ValueError("sqrt_upper needs d >= 0")
    s = math.isqrt(d)
    if s * s == d:
        return RationalUpper(Fraction(s), f"sqrt({d})", Fraction(0))
    scaled = d * _SQRT_GRAIN ** 2
    m = math.isqrt(scaled)
    if m * m < scaled:
        m += 1
    return RationalUpper(Fraction(m, _SQRT_GRAIN), f"sqrt({d})", Fraction(1, 10 ** 6))


# --------------------------------------------------------------------------
# symbolic natural bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NaturalBound:
    """An exact natural number, or a symbolic overflow marker.

    Overflow is a value, not an error: certificates must be able to report
    "bound exceeds the configured cap" honestly and keep going.
    """

    value: Optional[int]

    @classmethod
    def of(cls, v: int, cap: int = DEFAULT_CAP) -> "NaturalBound":
        if v < 0:
            raise ValueError("natural bounds cannot be negative")
        return cls(None) if v > cap else cls(v)

    @classmethod
    def overflow(cls) -> "NaturalBound":
        return cls(None)

    @property
    def is_overflow(self) -> bool:
        return self.value is None

    def __int__(self) -> int:
        if self.value is None:
            raise ValueError("overflow marker has no integer value")
        return self.value

    def to_json(self):
        if self.value is None:
            return {"overflow": True}
        return str(self.value)

    @classmethod
    def from_json(cls, obj) -> "NaturalBound":
        if isinstance(obj, dict):
            if obj.get("overflow") is True:
                return cls(None)
            raise ValueError(f"not a serialized NaturalBound: {obj!r}")
        return cls(int(obj))


# --------------------------------------------------------------------------
# modulus functions
# --------------------------------------------------------------------------

_CLOSED_FORM_KINDS = ("identity", "affine", "polynomial", "power_rate", "power_sum_rate")


@dataclass(frozen=True)
class ModulusFn:
    """A represented map N -> N.

    Closed-form kinds (identity, affine, polynomial with natural coefficients,
    power_rate, power_sum_rate) are total and monotone nondecreasing, and stay
    exact at arbitrarily large arguments. ``table`` is a finite lookup and
    raises outside its declared range: a modulus is a certificate, so a table
    never extrapolates.

    power_rate(c, p) is the convergence rate of c/(n+1)^p -> 0: the value at j
    is the first index n with c/(n+1)^p <= 1/(j+1).

    power_sum_rate(c, p), p >= 2, is a Cauchy rate for the series of
    c/(n+1)^p, obtained from the integral tail bound
    sum_{i>=N} c/(i+1)^p < c * N^(1-p) / (p-1).
    """

    kind: str
    a: int = 0
    b: int = 0
    coeffs: tuple = ()
    values: tuple = ()
    c: Fraction = Fraction(1)
    p: int = 1

    def __post_init__(self):
        if self.kind not in _CLOSED_FORM_KINDS + ("table",):
            raise ValueError(f"unknown modulus kind {self.kind!r}")
        if self.kind == "affine" and (self.a < 0 or self.b < 0):
            raise ValueError("affine modulus needs natural coefficients")
        if self.kind == "polynomial" and any(c < 0 for c in self.coeffs):
            raise ValueError("polynomial modulus needs natural coefficients")
        if self.kind in ("power_rate", "power_sum_rate"):
            if self.c <= 0 or self.p < 1:
                raise ValueError("power rate needs c > 0, p >= 1")
            if self.kind == "power_sum_rate" and self.p < 2:
                raise ValueError("a summable power rule needs exponent >= 2")
        if self.kind == "table" and any(v < 0 for v in self.values):
            raise ValueError("table values must be naturals")

    # -- construction helpers ------------------------------------------------

    @classmethod
    def identity(cls) -> "ModulusFn":
        return cls("identity")

    @classmethod
    def affine(cls, a: int, b: int) -> "ModulusFn":
        return cls("affine", a=a, b=b)

    @classmethod
    def polynomial(cls, coeffs: Sequence[int]) -> "ModulusFn":
        return cls("polynomial", coeffs=tuple(int(c) for c in coeffs))

    @classmethod
    def table(cls, values: Sequence[int]) -> "ModulusFn":
        return cls("table", values=tuple(int(v) for v in values))

    @classmethod
    def power_rate(cls, c, p: int) -> "ModulusFn":
        return cls("power_rate", c=Fraction(c), p=int(p))

    @classmethod
    def power_sum_rate(cls, c, p: int) -> "ModulusFn":
        return cls("power_sum_rate", c=Fraction(c), p=int(p))

    # -- evaluation -----------------------------------------------------------

    def __call__(self, n: int) -> int:
        if n < 0:
            raise ValueError("modulus arguments are naturals")
        if self.kind == "identity":
            return n
        if self.kind == "affine":
            return self.a * n + self.b
        if self.kind == "polynomial":
            return sum(co * n ** i for i, co in enumerate(self.coeffs))
        if self.kind == "power_rate":
            return max(ceil_nth_root(self.c * (n + 1), self.p) - 1, 0)
        if self.kind == "power_sum_rate":
            return ceil_nth_root(self.c * (n + 1) / (self.p - 1), self.p - 1)
        if n >= len(self.values):
            raise TableRangeError(
                f"table modulus evaluated at {n}, valid range is 0..{len(self.values) - 1}"
            )
        return self.values[n]

    # -- structure ------------------------------------------------------------

    @property
    def is_closed_form(self) -> bool:
        return self.kind in _CLOSED_FORM_KINDS

    @property
    def is_monotone(self) -> bool:
        """Closed forms are monotone by construction; tables are inspected."""
        if self.is_closed_form:
            return True
        return all(x <= y for x, y in zip(self.values, self.values[1:]))

    def to_json(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity"}
        if self.kind == "affine":
            return {"kind": "affine", "a": self.a, "b": self.b}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": list(self.coeffs)}
        if self.kind == "table":
            return {"kind": "table", "values": list(self.values)}
        return {"kind": self.kind, "c": str(self.c), "p": self.p}

    @classmethod
    def from_json(cls, obj: dict) -> "ModulusFn":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValueError(f"not a serialized modulus: {obj!r}")
        kind = obj["kind"]
        known = {
            "identity": (),
            "affine": ("a", "b"),
            "polynomial": ("coeffs",),
            "table": ("values",),
            "power_rate": ("c", "p"),
            "power_sum_rate": ("c", "p"),
        }
        if kind not in known:
            raise ValueError(f"unknown modulus kind {kind!r}")
        extra = set(obj) - {"kind"} - set(known[kind])
        if extra:
            raise ValueError(f"unknown modulus fields {sorted(extra)}")
        if kind == "identity":
            return cls.identity()
        if kind == "affine":
            return cls.affine(int(obj["a"]), int(obj["b"]))
        if kind == "polynomial":
            return cls.polynomial(obj["coeffs"])
        if kind == "table":
            return cls.table(obj["values"])
        c = Fraction(str(obj["c"]))
        if kind == "power_rate":
            return cls.power_rate(c, int(obj["p"]))
        return cls.power_sum_rate(c, int(obj["p"]))


#: A counterfunction is just a represented map N -> N used as the window
#: width g in metastability statements.
Counterfunction = ModulusFn

#: Two-argument residual-search modulus: phi(k, n) bounds the search for an
#: index N >= n whose step residual drops below 1/(k+1).
PhiSearch = Callable[[int, int], int]


# --------------------------------------------------------------------------
# modulus combinators
# --------------------------------------------------------------------------


def delta(k: int) -> int:
    """Stage threshold past which the step residual controls membership
    witnesses at precision k."""
    return 2 * k + 1


def omega(k: int, m_bound: int, varpi: ModulusFn) -> int:
    """Closeness level that transports approximate solution sets along the
    difference operator (two-term form)."""
    return max(4 * k + 3, varpi(4 * m_bound * (k + 1) ** 2 - 1))


def varpi_prime(k: int, b_bound: int, varpi: ModulusFn) -> int:
    """Continuity modulus for the Yosida approximate, derived from the
    modulus of the underlying operator."""
    return varpi(b_bound * k ** 2 + 2 * b_bound * k + b_bound - 1)


def chi(r: int, n: int, m: int, e_a: RationalUpper, cap: int = DEFAULT_CAP) -> NaturalBound:
    """Index bound for locating a quasi-stationary window: the larger of the
    shifted window end and the growth-compensated search start."""
    return NaturalBound.of(_chi_int(r, n, m, e_a), cap)


def _chi_int(r: int, n: int, m: int, e_a: RationalUpper) -> int:
    if r < 0 or n < 0 or m < 0:
        raise ValueError("chi arguments are naturals")
    return max(bounded_sub(n + m, 1), ceil_fraction(Fraction(r + 1) * m * e_a.value))


def xi_tilde(n: int, m_bound: int, e_a: RationalUpper, xi: ModulusFn) -> int:
    """Cauchy rate for the accumulated step sizes, rescaled by the uniform
    trajectory bound (2M+1)e^A."""
    return xi(ceil_fraction(Fraction(2 * m_bound + 1) * e_a.value * (n + 1)) - 1)


def total_boundedness_P(
    k: int,
    e_a: RationalUpper,
    sqrt_d: RationalUpper,
    l_bound: Fraction,
    d: int,
    cap: int = DEFAULT_CAP,
) -> NaturalBound:
    """Size of a 1/(8e^A(k+1))-net of the solution-search region: the number
    of recursion stages the metastability bound must absorb."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    inner = ceil_fraction(8 * e_a.value * (k + 1))
    base = ceil_fraction(2 * inner * sqrt_d.value * Fraction(l_bound))
    if base < 0:
        base = 0
    if base >= 2 and (base.bit_length() - 1) * d > cap.bit_length():
        return NaturalBound.overflow()
    return NaturalBound.of(base ** d + 1, cap)


def phi_liminf(k: int, n: int, q, phi_search: PhiSearch) -> int:
    """Search bound for an iterate whose fixed-point residual at stage-0 step
    size is below 1/(k+1), starting no earlier than n.

    ``q`` carries the certified constants (C, M) and moduli (theta, varpi);
    ``phi_search`` is the residual-search modulus of the trajectory.
    """
    first = ceil_fraction(2 * Fraction(q.C) * (k + 1)) - 1
    inner = q.theta(q.M * q.varpi(k) + q.M - 1)
    return phi_search(first, max(inner, n))


def _chi_g_max(n: int, g: Counterfunction, m: int, e_a: RationalUpper) -> int:
    """max over i <= n of chi(i, g(i), m); endpoint evaluation when g is
    monotone (chi is monotone in both index slots)."""
    if n == 0 or g.is_monotone:
        return _chi_int(n, g(n), m, e_a)
    return max(_chi_int(i, g(i), m, e_a) for i in range(n + 1))


def psi(
    k: int,
    g: Counterfunction,
    q,
    phi_search: PhiSearch,
    *,
    cap: int = DEFAULT_CAP,
    chi_floor: Optional[int] = None,
    p_override: Optional[int] = None,
) -> NaturalBound:
    """Rate of metastability for the iteration's trajectory.

    Iterates the residual-search bound through a net of candidate limit
    points: Psi_0(0) = 0, Psi_0(i+1) = Phi(chi_g^M(Psi_0(i), 8k+7), xi~(8k+7)),
    returning Psi_0(P). The sequence is monotone nondecreasing (asserted).
    Values above ``cap`` collapse to the symbolic overflow marker.

    ``p_override`` forcibly replaces the net size P (test hook; P = 0 gives 0).
    """
    e_a = exp_upper(q.A)
    sq = sqrt_upper(q.d)
    p_nb = total_boundedness_P(k, e_a, sq, q.L, q.d, cap)
    if p_nb.is_overflow:
        return NaturalBound.overflow()
    p_count = int(p_nb) if p_override is None else p_override
    m = 8 * k + 7
    xt = xi_tilde(m, q.M, e_a, q.xi)
    val = 0
    for _ in range(p_count):
        ci = _chi_g_max(val, g, m, e_a)
        if chi_floor is not None and ci < chi_floor:
            ci = chi_floor
        nxt = phi_liminf(ci, xt, q, phi_search)
        if nxt < val:
            raise InvariantViolation(
                f"metastability recursion decreased: {val} -> {nxt}"
            )
        val = nxt
        if val > cap:
            return NaturalBound.overflow()
    return NaturalBound.of(val, cap)


def psi_prime(
    k: int,
    g: Counterfunction,
    q,
    phi_search: PhiSearch,
    *,
    cap: int = DEFAULT_CAP,
) -> NaturalBound:
    """Metastability rate whose window additionally consists of approximate
    solutions: psi at the raised precision k0 = max(k, ceil((omega-1)/2)) with
    the three-term omega, and with the stage threshold delta(k) floored into
    every chi evaluation."""
    om = max(
        q.varpi(2 * k + 1),
        4 * k + 3,
        q.varpi(4 * q.M * (k + 1) ** 2 - 1),
    )
    k0 = max(k, ceil_div(om - 1, 2))
    return psi(k0, g, q, phi_search, cap=cap, chi_floor=delta(k))


def kappa(k: int, m_bound: int, b_bound: int) -> int:
    """Membership level at which approximate fixed-point residuals at stage-0
    step size drop below 1/(k+1)."""
    return 4 * (m_bound + 1) * (b_bound * (4 * k + 4) - 1) ** 2 - 1


def kappa_hat(
    k: int,
    m_bound: int,
    b_bound: int,
    b_prime: int,
    varpi_hat: ModulusFn,
) -> int:
    """Membership level controlling the selection-gap functional, derived
    from kappa through the continuity modulus of the subtracted operator."""
    arg = max(varpi_hat(2 * k + 1), bounded_sub(2 ** (b_prime + 1) * (k + 1), 1))
    return kappa(arg, m_bound, b_bound)
