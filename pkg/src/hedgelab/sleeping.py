"""Confidence-rated prediction over a dynamically growing expert registry.

Experts report a confidence in [0, 1] each round; zero confidence means the
expert abstains and must receive zero prediction weight.  The registry never
needs to know the total number of experts: ids are registered on their first
awake round with a prior weight from a pluggable policy (constant 1 by
default), and predictions only ever involve the currently awake ids.

All per-round sums run over ids in canonical sorted order so that emitted
traces are reproducible; an id passed with confidence 0 is treated exactly
like an absent id (not registered, state untouched, prediction weight 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np

from .fixed import relative_entropy
from .potential import ExpertState, PotentialParams, phi_arr, weight_arr

__all__ = ["ExpertId", "ConfidenceRound", "SleepingRegistry"]

ExpertId = Any  # opaque hashable, sortable within one registry


@dataclass
class ConfidenceRound:
    """Awake map id -> (confidence in (0, 1], loss in [0, 1]).

    Ids absent from the map are asleep for the round (confidence 0); their
    losses are never revealed.
    """

    awake: dict


class SleepingRegistry:
    """Expert states keyed by id, with prior weights and wake/sleep updates."""

    def __init__(
        self,
        prior_policy: Callable[[ExpertId], float] | None = None,
        params: PotentialParams | None = None,
    ):
        self.params = params if params is not None else PotentialParams()
        self._prior_policy = prior_policy if prior_policy is not None else (lambda _i: 1.0)
        self._R: dict = {}
        self._C: dict = {}
        self._w: dict = {}  # prior weight per id, fixed at registration

    # -- registry bookkeeping ------------------------------------------------

    @property
    def seen_count(self) -> int:
        """Number of distinct ids ever registered; never decreases."""
        return len(self._R)

    def ids(self) -> list:
        return sorted(self._R)

    def state(self, expert_id) -> ExpertState:
        return ExpertState(self._R[expert_id], self._C[expert_id])

    def prior_weight(self, expert_id) -> float:
        return self._w[expert_id]

    def _register(self, expert_id) -> None:
        if expert_id in self._R:
            return
        w = float(self._prior_policy(expert_id))
        if not (w > 0.0 and math.isfinite(w)):
            raise ValueError(f"prior weight for {expert_id!r} must be positive, got {w}")
        self._R[expert_id] = 0.0
        self._C[expert_id] = 0.0
        self._w[expert_id] = w

    # -- prediction and update ----------------------------------------------

    def _awake_arrays(self, confidences: Mapping):
        awake = []
        for expert_id, conf in confidences.items():
            conf = float(conf)
            if not (0.0 <= conf <= 1.0):
                raise ValueError(f"confidence for {expert_id!r} must be in [0, 1], got {conf}")
            if conf > 0.0:
                awake.append(expert_id)
        if not awake:
            raise ValueError("at least one id must be awake (confidence > 0)")
        awake.sort()
        for expert_id in awake:
            self._register(expert_id)
        q = np.array([self._w[i] for i in awake])
        conf = np.array([float(confidences[i]) for i in awake])
        R = np.array([self._R[i] for i in awake])
        C = np.array([self._C[i] for i in awake])
        s = q * conf * weight_arr(R, C)
        total = s.sum()
        if total <= 0.0:
            s = q * conf  # everyone at zero weight: fall back to confidence-scaled prior
            total = s.sum()
        return awake, conf, s / total

    def predict(self, confidences: Mapping) -> dict:
        """Prediction weights p_i proportional to q_i * I_i * weight(R_i, C_i).

        Supported only on awake ids; ids passed with confidence 0 get an
        explicit 0.  Weights sum to 1.
        """
        awake, _, p = self._awake_arrays(confidences)
        out = {expert_id: 0.0 for expert_id in confidences}
        for expert_id, pi in zip(awake, p):
            out[expert_id] = float(pi)
        return out

    def update(self, round_data) -> float:
        """Consume one round, return the player loss.

        Accepts a ConfidenceRound or a plain mapping id -> (confidence, loss).
        Awake ids are charged the confidence-scaled gap to the player loss;
        asleep ids are untouched bit for bit.
        """
        awake_map = round_data.awake if isinstance(round_data, ConfidenceRound) else round_data
        confidences = {i: cl[0] for i, cl in awake_map.items()}
        awake, conf, p = self._awake_arrays(confidences)
        losses = np.array([float(awake_map[i][1]) for i in awake])
        if np.any(losses < 0.0) or np.any(losses > 1.0) or not np.all(np.isfinite(losses)):
            raise ValueError("losses must lie in [0, 1]")
        player_loss = float(np.dot(p, losses))
        r = conf * (player_loss - losses)
        inc = self.params.increment(r)
        for k, expert_id in enumerate(awake):
            self._R[expert_id] += r[k]
            self._C[expert_id] += inc[k]
        return player_loss

    # -- certificates ---------------------------------------------------------

    def _normalized_prior(self, ids: list) -> np.ndarray:
        q = np.array([self._w[i] for i in ids])
        return q / q.sum()

    def potential_sum(self) -> float:
        """Prior-weighted potential sum over registered ids (prior normalized)."""
        ids = self.ids()
        if not ids:
            return 1.0
        q = self._normalized_prior(ids)
        R = np.array([self._R[i] for i in ids])
        C = np.array([self._C[i] for i in ids])
        return float(np.dot(q, phi_arr(R, C)))

    def certificate(self) -> float:
        """Round-by-round upper bound for the potential sum (d = 1 only)."""
        if self.params.d != 1.0:
            raise ValueError("potential certificate is only supported for d = 1")
        ids = self.ids()
        if not ids:
            return 2.5
        q = self._normalized_prior(ids)
        C = np.array([self._C[i] for i in ids])
        return 1.0 + 1.5 * float(np.dot(q, 1.0 + np.log1p(C)))

    def regret_bound(self, u: Mapping) -> float:
        """Anytime bound on the confidence-weighted regret to competitor u.

        u maps ids to nonnegative masses summing to 1.  The prior is
        normalized over the ids registered so far, so the entropy term grows
        only with the number of experts actually seen.  Mass on an
        unregistered id yields +inf.
        """
        mass = np.array([float(v) for v in u.values()])
        if np.any(mass < 0.0) or not math.isclose(mass.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("competitor must be a probability distribution")
        ids = self.ids()
        if any(expert_id not in self._R and float(v) > 0.0 for expert_id, v in u.items()):
            return math.inf
        q = self._normalized_prior(ids)
        uvec = np.array([float(u.get(i, 0.0)) for i in ids])
        re = relative_entropy(uvec, q)
        if math.isinf(re):
            return math.inf
        c_u = float(sum(float(v) * self._C[i] for i, v in u.items() if float(v) > 0.0))
        b = self.certificate()
        n_t = self.seen_count
        return math.sqrt(3.0 * c_u * (re + math.log(b) + math.log(1.0 + math.log(n_t))))
