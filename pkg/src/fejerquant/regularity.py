"""Gap functionals and moduli of regularity for Cauchy-rate extraction.

The three gap functionals vanish exactly on the solution set; a modulus of
regularity phi converts "the gap is small" into "the point is near a zero"
on a declared ball. Composing phi with the iteration's quantitative data
yields explicit Cauchy moduli: ``theta_generic`` for abstract quasi-Fejer
sequences and ``theta_moudafi`` for the resolvent iteration itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, EmptyGrid, InvariantViolation, ZeroInfimum
from .iteration import ProblemInstance
from .moduli import (
    DEFAULT_CAP,
    NaturalBound,
    PhiSearch,
    ceil_fraction,
    exp_upper,
    kappa,
    kappa_hat,
    phi_liminf,
    xi_tilde,
)
from .operators import as_point, domain_contains, evaluate, minimal_selection, resolvent

_GAP_VARIANTS = ("F1", "F2", "FDiff")


@dataclass(frozen=True, eq=False)
class GapFunctional:
    """A nonnegative functional vanishing exactly on the solution set.

    F1(x) = ||x - J^S_{mu_0}(x + mu_0 * T°x)||   (fixed-point gap)
    F2(x) = dist(T°x, Sx)                         (selection gap)
    FDiff(x) = dist(0, Tx - Sx)                   (difference-inclusion gap)
    """

    variant: str
    inst: ProblemInstance

    def __post_init__(self):
        if self.variant not in _GAP_VARIANTS:
            raise ConfigError(f"unknown gap variant {self.variant!r}")

    def __call__(self, x) -> float:
        return eval_gap(self, x)


def eval_gap(gap: GapFunctional, x) -> float:
    inst = gap.inst
    x = as_point(x, inst.dim)
    if not (domain_contains(inst.T, x) and domain_contains(inst.S, x)):
        raise DomainError("gap functionals need x in the domain of both operators")
    if gap.variant == "F1":
        mu0 = inst.schedule.mu(0)
        t_min = minimal_selection(inst.T, x)
        moved = resolvent(inst.S, mu0, x + mu0 * t_min)
        return float(np.linalg.norm(x - moved))
    if gap.variant == "F2":
        return evaluate(inst.S, x).dist_point(minimal_selection(inst.T, x))
    diff = evaluate(inst.T, x).minkowski_diff(evaluate(inst.S, x))
    return diff.dist_point(np.zeros(inst.dim))


# --------------------------------------------------------------------------
# moduli of regularity
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegularityModulus:
    """phi with: |F(x)| < phi(eps) implies dist(x, zer F) < eps on B(center; radius).

    ``linear`` is an analytic closed form phi(eps) = scale * eps; ``table``
    holds exact values at the epsilons it was certified for and refuses to
    answer anywhere else. Provenance records the epistemic status: analytic
    moduli are trusted inputs, grid-oracle moduli were checked on a finite
    grid only.
    """

    kind: str
    center: np.ndarray
    radius: Fraction
    provenance: str
    scale: Fraction = Fraction(1)
    entries: tuple = ()

    def __post_init__(self):
        if self.kind not in ("linear", "table"):
            raise ConfigError(f"unknown regularity modulus kind {self.kind!r}")
        if self.provenance not in ("analytic", "grid-oracle"):
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "radius", Fraction(self.radius))
        object.__setattr__(self, "scale", Fraction(self.scale))
        if self.radius <= 0:
            raise InvariantViolation("regularity ball radius must be positive")
        if self.kind == "linear" and self.scale <= 0:
            raise InvariantViolation("linear regularity modulus needs scale > 0")
        entries = tuple((Fraction(e), Fraction(p)) for e, p in self.entries)
        object.__setattr__(self, "entries", entries)
        if self.kind == "table":
            if not entries:
                raise InvariantViolation("table regularity modulus needs entries")
            if any(p <= 0 for _, p in entries):
                raise InvariantViolation("regularity modulus values must be positive")

    def phi_value(self, eps: Fraction) -> Fraction:
        """phi(eps), exact; tables answer only at certified epsilons."""
        eps = Fraction(eps)
        if eps <= 0:
            raise DomainError("regularity modulus arguments are positive")
        if self.kind == "linear":
            return self.scale * eps
        for e, p in self.entries:
            if e == eps:
                return p
        raise DomainError(
            f"regularity modulus not certified at eps={eps} "
            f"(certified: {[str(e) for e, _ in self.entries]})"
        )

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "provenance": self.provenance,
            "center": [float(v) for v in self.center],
            "radius": str(self.radius),
        }
        if self.kind == "linear":
            out["scale"] = str(self.scale)
        else:
            out["entries"] = [{"eps": str(e), "phi": str(p)} for e, p in self.entries]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "RegularityModulus":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ConfigError(f"not a serialized regularity modulus: {obj!r}")
        allowed = {"kind", "provenance", "center", "radius"}
        allowed |= {"scale"} if obj["kind"] == "linear" else {"entries"}
        extra = set(obj) - allowed
        if extra:
            raise ConfigError(f"unknown regularity modulus fields {sorted(extra)}")
        if obj["kind"] == "linear":
            return cls(
                "linear",
                np.array(obj["center"], dtype=float),
                Fraction(str(obj["radius"])),
                obj["provenance"],
                scale=Fraction(str(obj["scale"])),
            )
        entries = tuple(
            (Fraction(str(d["eps"])), Fraction(str(d["phi"]))) for d in obj["entries"]
        )
        return cls(
            "table",
            np.array(obj["center"], dtype=float),
            Fraction(str(obj["radius"])),
            obj["provenance"],
            entries=entries,
        )


# --------------------------------------------------------------------------
# abstract (G, H) data and the generic Cauchy modulus
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GHModuli:
    """Quantitative data of an abstract quasi-Fejer monotone sequence.

    alpha_g, beta_h: moduli for the transforms G and H (positive,
    nondecreasing eps-maps); beta_h_prime_at: the single value beta'_H(b+e)
    fixing the radius on which the regularity modulus must hold; b bounds
    G(d(x0, z)), e bounds the accumulated errors; tau(delta, n) bounds the
    index where the sequence comes within delta of the target set past the
    error-tail index n; xi(delta) is a Cauchy rate for the error series.
    """

    alpha_g: Callable[[Fraction], Fraction]
    beta_h: Callable[[Fraction], Fraction]
    beta_h_prime_at: Fraction
    b: Fraction
    e: Fraction
    tau: Callable[[Fraction, int], int]
    xi: Callable[[Fraction], int]

    def __post_init__(self):
        object.__setattr__(self, "beta_h_prime_at", Fraction(self.beta_h_prime_at))
        object.__setattr__(self, "b", Fraction(self.b))
        object.__setattr__(self, "e", Fraction(self.e))


def theta_generic(
    delta: Fraction,
    gh: GHModuli,
    phi_reg: RegularityModulus,
    cap: int = DEFAULT_CAP,
) -> NaturalBound:
    """Cauchy modulus theta(delta) = tau(phi(alpha_G(beta_H(delta/2)/2)),
    xi(beta_H(delta/2)/2)) for an abstract quasi-Fejer sequence."""
    delta = Fraction(delta)
    if delta <= 0:
        raise DomainError("Cauchy modulus arguments are positive")
    if phi_reg.radius < gh.beta_h_prime_at:
        raise DomainError(
            f"regularity modulus certified on radius {phi_reg.radius}, "
            f"needs beta'_H(b+e) = {gh.beta_h_prime_at}"
        )
    inner = gh.beta_h(delta / 2) / 2
    if inner <= 0:
        raise DomainError("beta_H must return positive values")
    n_err = gh.xi(inner)
    val = gh.tau(phi_reg.phi_value(gh.alpha_g(inner)), n_err)
    if val < 0:
        raise InvariantViolation("tau returned a negative index")
    return NaturalBound.of(val, cap)


# --------------------------------------------------------------------------
# the iteration-specific Cauchy modulus
# --------------------------------------------------------------------------


def theta_moudafi(
    eps: Fraction,
    q,
    phi_search: PhiSearch,
    phi_reg: RegularityModulus,
    use_kappa_hat: bool = False,
    cap: int = DEFAULT_CAP,
) -> NaturalBound:
    """Cauchy modulus for the resolvent iteration under metric regularity.

    theta(eps) = Phi(level, xi~(eps/4)) where level = kappa(ceil(1/phi(eps/(4e^A))))
    converts regularity of the fixed-point gap into membership depth, or
    kappa_hat of the same argument when phi_reg certifies the selection or
    difference gap instead (requires the continuity modulus of S).
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise DomainError("Cauchy modulus arguments are positive")
    e_a = exp_upper(q.A)
    phi_val = phi_reg.phi_value(eps / (4 * e_a.value))
    k_arg = ceil_fraction(1 / phi_val)
    if use_kappa_hat:
        if q.varpi_hat is None:
            raise ConfigError("kappa_hat needs the continuity modulus of S (varpi_hat)")
        level = kappa_hat(k_arg, q.M, q.B, q.Bprime, q.varpi_hat)
    else:
        level = kappa(k_arg, q.M, q.B)
    n_arg = xi_tilde(ceil_fraction(4 / eps), q.M, e_a, q.xi)
    return NaturalBound.of(phi_liminf(level, n_arg, q, phi_search), cap)


def validate_regularity_ball(
    inst: ProblemInstance, phi_reg: RegularityModulus, b: Fraction, k_max: int = 1000
) -> Fraction:
    """Certify the ball hypothesis of the iteration-specific Cauchy modulus.

    The trajectory stays in B(z; e^A*b + D) where b >= ||x0 - z|| and D bounds
    the total accumulated step sizes; D is certified from the Cauchy rate xi
    as min over k of (partial sum below xi(k)) + 1/(k+1), all exact rationals.
    Returns the certified radius; raises if phi_reg's ball is smaller.
    """
    b = Fraction(b)
    if float(np.linalg.norm(inst.x0 - phi_reg.center)) > float(b) + 1e-12:
        raise DomainError("b must bound the distance from x0 to the ball center")
    e_a = exp_upper(inst.quant.A)
    best = None
    partial = Fraction(0)
    upto = 0
    for k in range(k_max + 1):
        n_k = inst.quant.xi(k)
        while upto < n_k:
            partial += inst.schedule.mu_fraction(upto)
            upto += 1
        cand = partial + Fraction(1, k + 1)
        if best is None or cand < best:
            best = cand
    needed = e_a.value * b + best
    if phi_reg.radius < needed:
        raise DomainError(
            f"regularity ball radius {phi_reg.radius} smaller than the certified "
            f"trajectory radius {float(needed):.6g}"
        )
    return needed


# --------------------------------------------------------------------------
# grid-certified regularity moduli
# --------------------------------------------------------------------------


def _ball_grid(z: np.ndarray, r: Fraction, pitch: Fraction) -> np.ndarray:
    """Uniform product grid over the bounding box of B(z; r), filtered to the
    ball, with per-axis spacing <= pitch."""
    r_f = float(r)
    count = ceil_fraction(2 * Fraction(r) / Fraction(pitch)) + 1
    axes = [np.linspace(z[i] - r_f, z[i] + r_f, count) for i in range(z.shape[0])]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.linalg.norm(pts - z[None, :], axis=1) <= r_f + 1e-12
    return pts[keep]


def grid_regularity_oracle(
    gap: GapFunctional,
    zeros: Sequence,
    z,
    r: Fraction,
    eps_list: Sequence[Fraction],
) -> RegularityModulus:
    """Certify a table-backed regularity modulus on a finite grid.

    For each eps: phi(eps) = (1 - 1e-6) * min{ |F(x)| : grid x in B(z;r) with
    dist(x, zeros) >= eps }, on a grid of pitch <= eps/100. The shrink factor
    keeps the defining implication strict on the grid itself.
    """
    z = as_point(z)
    r = Fraction(r)
    eps_list = [Fraction(e) for e in eps_list]
    if r <= 0 or not eps_list:
        raise EmptyGrid("grid oracle needs r > 0 and at least one eps")
    if any(e <= 0 for e in eps_list):
        raise DomainError("eps values must be positive")
    if not zeros:
        raise EmptyGrid("grid oracle needs the analytic zero set")
    zero_pts = np.stack([as_point(p, z.shape[0]) for p in zeros])
    pitch = min(eps_list) / 100
    pts = _ball_grid(z, r, pitch)
    gaps = np.array([eval_gap(gap, p) for p in pts])
    dists = np.min(
        np.linalg.norm(pts[:, None, :] - zero_pts[None, :, :], axis=2), axis=1
    )
    entries = []
    for eps in eps_list:
        mask = dists >= float(eps)
        if not np.any(mask):
            raise ZeroInfimum(
                f"every grid point is within {eps} of the zero set; "
                "phi is unconstrained at this eps"
            )
        inf_gap = float(np.min(gaps[mask]))
        if inf_gap <= 0:
            raise ZeroInfimum(
                f"gap vanishes at distance >= {eps} from the declared zeros; "
                "no positive phi exists at this eps"
            )
        entries.append((eps, Fraction(inf_gap * (1.0 - 1e-6))))
    return RegularityModulus(
        "table", z, r, "grid-oracle", entries=tuple(entries)
    )


def verify_regularity_on_grid(
    gap: GapFunctional,
    phi_reg: RegularityModulus,
    zeros: Sequence,
    eps: Fraction,
    pitch: Fraction,
) -> bool:
    """Check the defining implication |F(x)| < phi(eps) => dist(x, zeros) < eps
    on an independent grid of the stated pitch."""
    eps = Fraction(eps)
    z = phi_reg.center
    zero_pts = np.stack([as_point(p, z.shape[0]) for p in zeros])
    pts = _ball_grid(z, phi_reg.radius, pitch)
    phi_val = float(phi_reg.phi_value(eps))
    for p in pts:
        if eval_gap(gap, p) < phi_val:
            if float(np.min(np.linalg.norm(zero_pts - p[None, :], axis=1))) >= float(eps):
                return False
    return True
