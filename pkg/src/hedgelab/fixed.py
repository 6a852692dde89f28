"""Parameter-free hedging over a fixed, known set of N experts.

The learner keeps per-expert accumulators (R, C) and predicts proportionally
to prior * weight(R, C).  With the default exponent d=1 the weighted potential
sum admits a runtime certificate that every trace must satisfy, and explicit
regret bounds against arbitrary competitor distributions can be evaluated at
any time from the live state.
"""

from __future__ import annotations

import math

import numpy as np

from .potential import ExpertState, PotentialParams, phi_arr, weight_arr

__all__ = ["FixedLearner", "relative_entropy"]


def relative_entropy(u: np.ndarray, q: np.ndarray) -> float:
    """KL divergence sum_i u_i ln(u_i / q_i); +inf if u puts mass where q has none."""
    u = np.asarray(u, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = u > 0.0
    if np.any(q[mask] == 0.0):
        return math.inf
    return float(np.sum(u[mask] * np.log(u[mask] / q[mask])))


def _as_prob_vector(v, n: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d array")
    if n is not None and v.size != n:
        raise ValueError(f"{name} has length {v.size}, expected {n}")
    if np.any(v < 0.0) or not np.all(np.isfinite(v)):
        raise ValueError(f"{name} entries must be finite and nonnegative")
    total = v.sum()
    if total <= 0.0:
        raise ValueError(f"{name} must have positive total mass")
    return v / total


class FixedLearner:
    """Hedging learner over N experts with prior q and accumulator exponent d.

    The prior may be given as any nonnegative weight vector; it is normalized
    once at construction and never changes (predictions are invariant to the
    overall scale of the prior).  d=0 gives the round-counting variant whose
    accumulator is simply the round index.
    """

    def __init__(self, prior, params: PotentialParams | None = None):
        self.q = _as_prob_vector(prior, name="prior")
        self.params = params if params is not None else PotentialParams()
        n = self.q.size
        self.R = np.zeros(n)
        self.C = np.zeros(n)
        self.t = 0
        self._cached_round = -1
        self._cached_p: np.ndarray | None = None

    @property
    def n_experts(self) -> int:
        return self.q.size

    @property
    def states(self) -> list[ExpertState]:
        return [ExpertState(float(r), float(c)) for r, c in zip(self.R, self.C)]

    def predict(self) -> np.ndarray:
        """Distribution over experts: p_i proportional to q_i * weight(R_i, C_i).

        Falls back to the prior when every unnormalized weight is zero.
        """
        if self._cached_round == self.t and self._cached_p is not None:
            return self._cached_p.copy()
        s = self.q * weight_arr(self.R, self.C)
        total = s.sum()
        p = self.q.copy() if total <= 0.0 else s / total
        self._cached_round = self.t
        self._cached_p = p
        return p.copy()

    def update(self, losses) -> float:
        """Consume one round of losses in [0, 1]^N, return the player loss.

        The prediction is recomputed internally so the weighted sum of
        instantaneous regrets is zero by construction.
        """
        losses = np.asarray(losses, dtype=float)
        if losses.shape != (self.n_experts,):
            raise ValueError(f"losses must have shape ({self.n_experts},)")
        if np.any(losses < 0.0) or np.any(losses > 1.0) or not np.all(np.isfinite(losses)):
            raise ValueError("losses must lie in [0, 1]")
        p = self.predict()
        player_loss = float(np.dot(p, losses))
        r = player_loss - losses
        self.R += r
        self.C += self.params.increment(r)
        self.t += 1
        return player_loss

    def potential_sum(self) -> float:
        """Current prior-weighted sum of per-expert potentials."""
        return float(np.dot(self.q, phi_arr(self.R, self.C)))

    def certificate(self) -> float:
        """Upper bound the weighted potential sum must satisfy at every round.

        Only available for d=1: 1 + (3/2) * sum_i q_i (1 + ln(1 + C_i)).
        After T rounds this is at most 5/2 + (3/2) ln(1+T).
        """
        if self.params.d != 1.0:
            raise ValueError("potential certificate is only supported for d = 1")
        return 1.0 + 1.5 * float(np.dot(self.q, 1.0 + np.log1p(self.C)))

    def bound_coefficient(self, u) -> float:
        """A(u) = 3 * (RE(u||q) + ln B + ln(1 + ln N)) for competitor u."""
        u = _as_prob_vector(u, self.n_experts, name="competitor")
        re = relative_entropy(u, self.q)
        if math.isinf(re):
            return math.inf
        b = self.certificate()
        return 3.0 * (re + math.log(b) + math.log(1.0 + math.log(self.n_experts)))

    def regret_bound(self, u) -> float:
        """Anytime regret bound sqrt((u . C) * A(u)) for any competitor distribution u.

        Returns +inf when u puts mass on experts with zero prior.
        """
        u = _as_prob_vector(u, self.n_experts, name="competitor")
        a = self.bound_coefficient(u)
        if math.isinf(a):
            return math.inf
        return math.sqrt(float(np.dot(u, self.C)) * a)

    def regret_bound_uniform_subset(self, subset) -> float:
        """Sharper bound for u uniform over a subset S: the log-log term drops to 1."""
        idx = np.asarray(subset, dtype=int)
        if idx.size == 0:
            raise ValueError("subset must be nonempty")
        u = np.zeros(self.n_experts)
        u[idx] = 1.0 / idx.size
        re = relative_entropy(u, self.q)
        if math.isinf(re):
            return math.inf
        b = self.certificate()
        return math.sqrt(3.0 * float(np.dot(u, self.C)) * (re + math.log(b) + 1.0))
