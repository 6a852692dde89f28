"""Scalar potential and weight functions shared by all learners.

The potential of an expert with cumulative regret R and accumulator C is
exp([R]+^2 / (3C)), with the (0, 0) corner defined as 1.  Prediction weights
are the symmetric discrete derivative of the potential, taken one unit out in
both arguments.  Everything here is pure and safe to call from any thread.

With the default accumulator exponent d=1 the invariant |R| <= C holds along
any valid update sequence, so the potential exponent is at most C/3: linear
space only overflows past C ~ 2000, far beyond harness scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PotentialParams",
    "ExpertState",
    "phi",
    "weight",
    "phi_arr",
    "weight_arr",
    "GRID_R",
    "GRID_C",
    "GRID_r",
    "CheckResult",
    "check_increment_bound",
    "check_piecewise_convexity",
    "check_weight_zero_set",
    "check_weight_consistency",
    "run_grid_checks",
]


@dataclass(frozen=True)
class PotentialParams:
    """Accumulator exponent d: increments are |r|^d with 0^0 := 1.

    d=1 tracks the cumulative magnitude of instantaneous regrets; d=0 counts
    rounds, which recovers the denominator-3t variant.  Values outside [0, 1]
    are rejected (d=2 is not supported).
    """

    d: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.d <= 1.0):
            raise ValueError(f"accumulator exponent d must be in [0, 1], got {self.d}")

    def increment(self, r: np.ndarray) -> np.ndarray:
        """|r|^d elementwise, with the 0^0 := 1 convention for d = 0."""
        if self.d == 1.0:
            return np.abs(r)
        if self.d == 0.0:
            return np.ones_like(r)
        return np.abs(r) ** self.d


@dataclass
class ExpertState:
    """Per-expert accumulators: cumulative regret R, accumulator C >= 0."""

    R: float = 0.0
    C: float = 0.0


def phi(R: float, C: float) -> float:
    """Potential exp([R]+^2 / (3C)); equals 1 whenever [R]+ = 0.

    Raises ValueError for C < 0 and for the unreachable corner R > 0, C = 0
    (valid update sequences keep |R| <= C).
    """
    if C < 0.0:
        raise ValueError(f"accumulator C must be nonnegative, got {C}")
    if R <= 0.0:
        return 1.0
    if C == 0.0:
        raise ValueError("potential undefined for R > 0 with C = 0")
    try:
        return math.exp(R * R / (3.0 * C))
    except OverflowError:
        return math.inf


def weight(R: float, C: float) -> float:
    """Prediction weight 0.5 * (phi(R+1, C+1) - phi(R-1, C+1)).

    Nonnegative; zero exactly when R <= -1; strictly increasing in R beyond
    that point.
    """
    if C < 0.0:
        raise ValueError(f"accumulator C must be nonnegative, got {C}")
    return 0.5 * (phi(R + 1.0, C + 1.0) - phi(R - 1.0, C + 1.0))


def phi_arr(R: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Vectorized potential.  C must be strictly positive wherever R > 0."""
    Rp = np.maximum(R, 0.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        expo = np.where(Rp > 0.0, Rp * Rp / (3.0 * C), 0.0)
        return np.exp(expo)


def weight_arr(R: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Vectorized prediction weight; C >= 0 elementwise assumed.

    Hot path for the interval learner (touched N*t times per round), so the
    two potentials are evaluated with in-place buffer arithmetic; the shifted
    denominator 3(C+1) is always positive, which keeps the corner handling of
    phi_arr unnecessary here.
    """
    R = np.atleast_1d(np.asarray(R, dtype=float))
    C = np.atleast_1d(np.asarray(C, dtype=float))
    denom = 3.0 * (C + 1.0)
    a = np.maximum(R + 1.0, 0.0)
    np.multiply(a, a, out=a)
    np.divide(a, denom, out=a)
    np.exp(a, out=a)
    b = np.maximum(R - 1.0, 0.0)
    np.multiply(b, b, out=b)
    np.divide(b, denom, out=b)
    np.exp(b, out=b)
    np.subtract(a, b, out=a)
    a *= 0.5
    return a


# ---------------------------------------------------------------------------
# Grid checks
#
# These back the selfcheck command and the property tests.  The grid is fixed;
# checks are parameterized by the weight function so that a deliberately
# perturbed weight can be shown to trip them (mutation sensitivity).
# ---------------------------------------------------------------------------

GRID_R = np.arange(-10.0, 10.0 + 1e-12, 0.25)
GRID_C = np.array([0.0, 0.5, 1.0, 5.0, 50.0])
GRID_r = np.arange(-1.0, 1.0 + 1e-12, 0.05)

REL_TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    checked: int = 0
    failures: int = 0
    worst_margin: float = math.inf  # most negative slack seen
    examples: list = field(default_factory=list)  # a few failing points

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, margin: float, point) -> None:
        self.checked += 1
        if margin < self.worst_margin:
            self.worst_margin = margin
        if margin < 0.0:
            self.failures += 1
            if len(self.examples) < 5:
                self.examples.append(point)


def _phi_extended(R: float, C: float) -> float:
    # Grid points with R > 0, C = 0 sit outside the reachable state space;
    # the limiting potential there is +inf, which makes any upper bound vacuous.
    if R > 0.0 and C == 0.0:
        return math.inf
    return phi(R, C)


def check_increment_bound(weight_fn=weight, rel_tol: float = REL_TOL) -> CheckResult:
    """One-step potential growth bound over the full grid.

    For every grid triple (R, C, r) with r in [-1, 1]:
        phi(R+r, C+|r|) <= phi(R, C) + weight(R, C)*r + 3|r| / (2(C+1)),
    allowing rel_tol * phi(R, C) of slack.
    """
    res = CheckResult("increment-bound")
    for C in GRID_C:
        for R in GRID_R:
            base = _phi_extended(R, C)
            if math.isinf(base):
                continue  # vacuous corner
            w = weight_fn(R, C)
            for r in GRID_r:
                lhs = _phi_extended(R + r, C + abs(r))
                rhs = base + w * r + 3.0 * abs(r) / (2.0 * (C + 1.0)) + rel_tol * base
                res.record(rhs - lhs, (float(R), float(C), float(r)))
    return res


def check_piecewise_convexity(rel_tol: float = REL_TOL) -> CheckResult:
    """Midpoint convexity of r -> phi(R+r, C+|r|), separately on [-1,0] and [0,1]."""
    res = CheckResult("piecewise-convexity")
    steps = GRID_r[GRID_r >= 0.0]
    for C in GRID_C:
        for R in GRID_R:
            for sign in (1.0, -1.0):
                vals = [_phi_extended(R + sign * a, C + a) for a in steps]
                for i, a in enumerate(steps):
                    for j in range(i, len(steps)):
                        b = steps[j]
                        fa, fb = vals[i], vals[j]
                        if math.isinf(fa) or math.isinf(fb):
                            continue
                        fm = _phi_extended(R + sign * (a + b) / 2.0, C + (a + b) / 2.0)
                        bound = 0.5 * (fa + fb) + rel_tol * max(fa, fb)
                        res.record(bound - fm, (float(R), float(C), float(sign * a), float(sign * b)))
    return res


def check_weight_zero_set(weight_fn=weight) -> CheckResult:
    """weight(R, C) == 0 exactly when R <= -1, on all grid (R, C) pairs."""
    res = CheckResult("weight-zero-set")
    for C in GRID_C:
        for R in GRID_R:
            w = weight_fn(R, C)
            if R <= -1.0:
                res.record(-abs(w), (float(R), float(C)))  # must be exactly 0
            else:
                res.record(w if w > 0.0 else -1.0, (float(R), float(C)))
    return res


def check_weight_consistency(weight_fn=weight, rel_tol: float = REL_TOL) -> CheckResult:
    """weight agrees with the discrete derivative of the potential on the grid.

    This is the check with the bite for mutation sensitivity: the growth bound
    alone has enough slack on this grid to absorb a uniform ~10% rescaling of
    the weights, but any rescaling breaks this identity immediately.
    """
    res = CheckResult("weight-consistency")
    for C in GRID_C:
        for R in GRID_R:
            expected = 0.5 * (phi(R + 1.0, C + 1.0) - phi(R - 1.0, C + 1.0))
            got = weight_fn(R, C)
            tol = rel_tol * max(abs(expected), 1.0)
            res.record(tol - abs(got - expected), (float(R), float(C)))
    return res


def run_grid_checks(weight_fn=weight) -> list[CheckResult]:
    """All potential/weight grid checks; used by selfcheck and the test suite."""
    return [
        check_increment_bound(weight_fn),
        check_piecewise_convexity(),
        check_weight_zero_set(weight_fn),
        check_weight_consistency(weight_fn),
    ]
