"""Operator catalog: closed-form resolvents, set values, selections.

Closed-form cases are asserted exactly or to 1e-12; sampled operator
properties (firm nonexpansiveness, graph membership, minimal-norm
optimality) use a fixed-seed generator so failures are reproducible.
"""

import math

import numpy as np
import pytest

from fejerquant.errors import (
    DimensionMismatch,
    DomainError,
    InvariantViolation,
    NonPositiveParameter,
)
from fejerquant.operators import (
    AffinePSD,
    NormalConeBox,
    SubdiffAbsSum,
    ValueSet,
    ZeroOperator,
    as_point,
    domain_contains,
    evaluate,
    hstar_check,
    minimal_selection,
    operator_from_json,
    operator_to_json,
    resolvent,
    resolvent_batch,
    resolvent_identity_residual,
    sup_dist_sq,
    yosida,
)

EXACT = 1e-12
MEMB = 1e-9


def catalog():
    """One instance of every operator variant, mixed dimensions."""
    return [
        AffinePSD(np.array([[1.0]]), np.array([0.0])),
        AffinePSD(np.array([[2.0, 0.5], [0.5, 1.0]]), np.array([1.0, -1.0])),
        SubdiffAbsSum(1),
        SubdiffAbsSum(3),
        NormalConeBox(np.array([0.0, -1.0]), np.array([1.0, 2.0])),
        ZeroOperator(2),
    ]


def sample_domain_point(op, rng):
    x = rng.uniform(-3.0, 3.0, size=op.dim)
    if isinstance(op, NormalConeBox):
        x = np.minimum(np.maximum(x, op.lo), op.hi)
    return x


def sample_value(vs, rng):
    """A random member of an interval product (infinite rays truncated)."""
    lo = np.where(np.isinf(vs.lo), -5.0, vs.lo)
    hi = np.where(np.isinf(vs.hi), 5.0, vs.hi)
    return rng.uniform(lo, hi)


# --------------------------------------------------------------------------
# value sets
# --------------------------------------------------------------------------


def test_value_set_basics():
    vs = ValueSet(np.array([-1.0]), np.array([1.0]))
    assert vs.contains([0.5])
    assert not vs.contains([1.5])
    assert vs.contains([1.0 + 1e-10], tol=1e-9)
    assert vs.dist_point([2.0]) == pytest.approx(1.0, abs=EXACT)
    assert vs.project([3.0])[0] == 1.0
    assert ValueSet.singleton([2.0, 3.0]).dist_point([2.0, 3.0]) == 0.0


def test_value_set_rejects_bad_bounds():
    with pytest.raises(InvariantViolation):
        ValueSet(np.array([1.0]), np.array([0.0]))
    with pytest.raises(InvariantViolation):
        ValueSet(np.array([np.nan]), np.array([1.0]))
    with pytest.raises(InvariantViolation):
        ValueSet(np.array([np.inf]), np.array([np.inf]))
    with pytest.raises(DimensionMismatch):
        ValueSet(np.array([0.0]), np.array([0.0, 1.0]))


def test_minkowski_difference():
    a = ValueSet(np.array([2.0]), np.array([2.0]))
    b = ValueSet(np.array([-1.0]), np.array([1.0]))
    d = a.minkowski_diff(b)
    assert d.lo[0] == 1.0 and d.hi[0] == 3.0
    assert d.dist_point([0.0]) == pytest.approx(1.0, abs=EXACT)


def test_sup_dist_handles_infinite_rays():
    ray = ValueSet(np.array([-np.inf]), np.array([0.0]))
    pt = ValueSet.singleton([0.0])
    assert sup_dist_sq(pt, ray) == 0.0
    assert sup_dist_sq(ray, pt) == float("inf")
    assert sup_dist_sq(ray, ray) == 0.0


def test_hstar_examples():
    half = ValueSet.singleton([0.5])
    sym = ValueSet(np.array([-1.0]), np.array([1.0]))
    origin = ValueSet.singleton([0.0])
    assert hstar_check(half, sym, 0.0)
    assert not hstar_check(sym, origin, 0.5)
    assert hstar_check(sym, origin, 1.0)
    with pytest.raises(ValueError):
        hstar_check(half, sym, -0.1)


def test_as_point_validation():
    assert as_point(2.0).shape == (1,)
    with pytest.raises(DomainError):
        as_point([np.nan])
    with pytest.raises(DimensionMismatch):
        as_point([1.0, 2.0], dim=3)
    with pytest.raises(DimensionMismatch):
        as_point([[1.0, 2.0]])


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def test_evaluate_subdifferential():
    op = SubdiffAbsSum(1)
    at0 = evaluate(op, [0.0])
    assert at0.lo[0] == -1.0 and at0.hi[0] == 1.0
    at = evaluate(op, [0.3])
    assert at.lo[0] == 1.0 and at.hi[0] == 1.0
    atm = evaluate(op, [-0.3])
    assert atm.lo[0] == -1.0 and atm.hi[0] == -1.0


def test_evaluate_affine_identity():
    op = AffinePSD(np.eye(2), np.zeros(2))
    vs = evaluate(op, [2.0, 3.0])
    assert vs.contains([2.0, 3.0]) and vs.lo[0] == vs.hi[0]


def test_evaluate_normal_cone():
    op = NormalConeBox(np.array([0.0]), np.array([1.0]))
    interior = evaluate(op, [0.5])
    assert interior.lo[0] == 0.0 and interior.hi[0] == 0.0
    lower = evaluate(op, [0.0])
    assert lower.lo[0] == -np.inf and lower.hi[0] == 0.0
    upper = evaluate(op, [1.0])
    assert upper.lo[0] == 0.0 and upper.hi[0] == np.inf
    with pytest.raises(DomainError):
        evaluate(op, [1.5])
    assert not domain_contains(op, [1.5])
    assert domain_contains(op, [1.5], tol=1.0)


def test_evaluate_zero_operator():
    vs = evaluate(ZeroOperator(2), [4.0, -2.0])
    assert vs.contains([0.0, 0.0]) and vs.lo[1] == vs.hi[1] == 0.0


def test_monotonicity_spot_check():
    rng = np.random.default_rng(7)
    for op in catalog():
        for _ in range(50):
            x = sample_domain_point(op, rng)
            y = sample_domain_point(op, rng)
            u = sample_value(evaluate(op, x), rng)
            v = sample_value(evaluate(op, y), rng)
            assert float(np.dot(x - y, u - v)) >= -MEMB


# --------------------------------------------------------------------------
# resolvents
# --------------------------------------------------------------------------


def test_resolvent_closed_forms():
    assert resolvent(SubdiffAbsSum(1), 1.0, [3.0])[0] == pytest.approx(2.0, abs=EXACT)
    assert resolvent(AffinePSD(np.array([[1.0]]), np.array([0.0])), 1.0, [2.0])[0] == (
        pytest.approx(1.0, abs=EXACT)
    )
    box = NormalConeBox(np.array([0.0]), np.array([1.0]))
    assert resolvent(box, 5.0, [-3.0])[0] == 0.0
    assert resolvent(box, 0.01, [-3.0])[0] == 0.0  # projection, scale-free
    assert resolvent(ZeroOperator(1), 2.0, [4.0])[0] == 4.0


def test_resolvent_rejects_nonpositive_parameter():
    for op in catalog():
        with pytest.raises(NonPositiveParameter):
            resolvent(op, 0.0, np.zeros(op.dim))
        with pytest.raises(NonPositiveParameter):
            resolvent(op, -1.0, np.zeros(op.dim))


def test_resolvent_graph_membership():
    rng = np.random.default_rng(11)
    for op in catalog():
        for _ in range(50):
            x = sample_domain_point(op, rng)
            lam = float(rng.uniform(0.05, 10.0))
            j = resolvent(op, lam, x)
            assert evaluate(op, j).contains((x - j) / lam, tol=MEMB)


def test_firm_nonexpansiveness_sampled():
    rng = np.random.default_rng(3)
    for op in catalog():
        for _ in range(100):
            x = sample_domain_point(op, rng)
            y = sample_domain_point(op, rng)
            lam = float(rng.uniform(0.05, 10.0))
            jx = resolvent(op, lam, x)
            jy = resolvent(op, lam, y)
            lhs = float(np.dot(jx - jy, jx - jy))
            rhs = float(np.dot(x - y, jx - jy))
            assert lhs <= rhs + MEMB


def test_yosida_closed_forms():
    assert yosida(AffinePSD(np.array([[1.0]]), np.array([0.0])), 1.0, [2.0])[0] == (
        pytest.approx(1.0, abs=EXACT)
    )
    assert yosida(SubdiffAbsSum(1), 1.0, [3.0])[0] == pytest.approx(1.0, abs=EXACT)
    assert yosida(AffinePSD(np.array([[1.0]]), np.array([0.0])), 1.0, [0.0])[0] == 0.0


def test_yosida_lipschitz_bound():
    rng = np.random.default_rng(19)
    for op in catalog():
        for _ in range(60):
            x = sample_domain_point(op, rng)
            y = sample_domain_point(op, rng)
            lam = float(rng.uniform(0.05, 5.0))
            tx = yosida(op, lam, x)
            ty = yosida(op, lam, y)
            assert np.linalg.norm(tx - ty) <= np.linalg.norm(x - y) / lam + MEMB


def test_yosida_lies_in_graph_at_resolvent():
    rng = np.random.default_rng(23)
    for op in catalog():
        for _ in range(60):
            x = sample_domain_point(op, rng)
            lam = float(rng.uniform(0.05, 5.0))
            assert evaluate(op, resolvent(op, lam, x)).contains(
                yosida(op, lam, x), tol=MEMB
            )


def test_resolvent_batch_matches_single():
    rng = np.random.default_rng(31)
    lams = np.array([0.1, 0.5, 1.0, 2.0, 7.5])
    for op in catalog():
        x = sample_domain_point(op, rng)
        batch = resolvent_batch(op, lams, x)
        for i, lam in enumerate(lams):
            assert np.allclose(batch[i], resolvent(op, float(lam), x), atol=EXACT)
    with pytest.raises(NonPositiveParameter):
        resolvent_batch(SubdiffAbsSum(1), np.array([1.0, 0.0]), [1.0])


# --------------------------------------------------------------------------
# minimal selections
# --------------------------------------------------------------------------


def test_minimal_selection_examples():
    assert minimal_selection(SubdiffAbsSum(1), [0.0])[0] == 0.0
    assert minimal_selection(SubdiffAbsSum(1), [0.3])[0] == 1.0
    box = NormalConeBox(np.array([0.0]), np.array([1.0]))
    assert minimal_selection(box, [0.0])[0] == 0.0


def test_minimal_selection_is_least_norm():
    rng = np.random.default_rng(43)
    for op in catalog():
        for _ in range(60):
            x = sample_domain_point(op, rng)
            vs = evaluate(op, x)
            sel = minimal_selection(op, x)
            assert vs.contains(sel, tol=EXACT)
            z = sample_value(vs, rng)
            assert np.linalg.norm(sel) <= np.linalg.norm(z) + EXACT
            # projection anchor: the selection sees every member at an
            # obtuse angle from the origin
            assert float(np.dot(z - sel, -sel)) <= MEMB


def test_near_minimal_members_are_near_the_selection():
    # if <T°x - z, -z> <= 1/(k+1)^2 for a member z, then z is 1/(k+1)-close
    rng = np.random.default_rng(47)
    for op in catalog():
        for _ in range(80):
            x = sample_domain_point(op, rng)
            vs = evaluate(op, x)
            sel = minimal_selection(op, x)
            z = sample_value(vs, rng)
            for k in (0, 1, 4):
                bound = 1.0 / (k + 1)
                if float(np.dot(sel - z, -z)) <= bound * bound:
                    assert np.linalg.norm(sel - z) <= bound + MEMB


# --------------------------------------------------------------------------
# the two-parameter resolvent identity
# --------------------------------------------------------------------------


def test_resolvent_identity_lambda_one_is_exact():
    rng = np.random.default_rng(53)
    for op in catalog():
        x = sample_domain_point(op, rng)
        assert resolvent_identity_residual(op, 2.7, 1.0, x) == 0.0


def test_resolvent_identity_closed_form_cases():
    op = AffinePSD(np.array([[1.0]]), np.array([0.0]))
    assert resolvent_identity_residual(op, 2.0, 0.5, [4.0]) <= EXACT
    assert resolvent_identity_residual(SubdiffAbsSum(1), 1.0, 3.0, [5.0]) <= EXACT


def test_resolvent_identity_random_parameters():
    rng = np.random.default_rng(59)
    for op in catalog():
        for _ in range(100):
            x = sample_domain_point(op, rng)
            gamma = float(rng.uniform(0.1, 10.0))
            lam = float(rng.uniform(0.1, 10.0))
            assert resolvent_identity_residual(op, gamma, lam, x) <= 1e-10


# --------------------------------------------------------------------------
# construction and serialization
# --------------------------------------------------------------------------


def test_affine_psd_construction_guards():
    with pytest.raises(InvariantViolation):
        AffinePSD(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros(2))  # asymmetric
    with pytest.raises(InvariantViolation):
        AffinePSD(np.array([[-1.0]]), np.zeros(1))  # negative eigenvalue
    with pytest.raises(DimensionMismatch):
        AffinePSD(np.eye(2), np.zeros(3))
    diag = AffinePSD(np.diag([1.0, 2.0]), np.zeros(2))
    assert diag.is_diagonal
    assert not AffinePSD(np.array([[2.0, 0.5], [0.5, 1.0]]), np.zeros(2)).is_diagonal


def test_normal_cone_box_construction_guards():
    with pytest.raises(InvariantViolation):
        NormalConeBox(np.array([1.0]), np.array([0.0]))
    with pytest.raises(InvariantViolation):
        NormalConeBox(np.array([-np.inf]), np.array([0.0]))


def test_operator_json_round_trip():
    rng = np.random.default_rng(61)
    for op in catalog():
        again = operator_from_json(operator_to_json(op))
        assert type(again) is type(op)
        x = sample_domain_point(op, rng)
        assert np.allclose(resolvent(again, 0.7, x), resolvent(op, 0.7, x), atol=0)


def test_operator_json_rejects_unknown():
    with pytest.raises(ValueError):
        operator_from_json({"kind": "mystery"})
    with pytest.raises(ValueError):
        operator_from_json({"kind": "zero", "dim": 1, "extra": 2})
    with pytest.raises(ValueError):
        operator_from_json({"dim": 1})


def test_norm_conventions():
    # euclidean throughout: distances of 2-d sets agree with math.hypot
    vs = ValueSet(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
    assert vs.dist_point([0.0, 0.0]) == pytest.approx(math.hypot(1.0, 2.0), abs=EXACT)
