"""Interval-adaptive learner built from birth-scheduled sleeping experts.

Every round t spawns one fresh copy of each base expert; the copy born at
round tau accumulates regret only over rounds tau..t, and its prior weight is
1/tau^2 (left unnormalized: predictions are scale-invariant in the prior).
Predicting with the sum of copy weights per base expert yields a learner whose
regret is controlled on every time interval simultaneously, which in turn
bounds shifting regret against the best segmented competitor.

The state is the naive (rounds x experts) array of copy accumulators: O(N*t)
time per round and O(N*T) memory, so harness runs cap T around 20k.  The
arithmetic mirrors SleepingRegistry exactly (same elementwise operations in
the same canonical order), so driving a registry with birth-scheduled ids
reproduces this learner's outputs bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

from .potential import phi_arr, weight_arr

__all__ = [
    "TvLearner",
    "adaptive_regret",
    "interval_bound",
    "check_all_interval_bounds",
]


class TvLearner:
    """Base-expert predictions from per-birth-round sleeping copies (d = 1)."""

    def __init__(self, n_base: int, horizon: int | None = None):
        if n_base < 1:
            raise ValueError("need at least one base expert")
        self.n = int(n_base)
        self.t = 0  # completed rounds
        cap = int(horizon) if horizon else 16
        self._R = np.zeros((cap, self.n))
        self._C = np.zeros((cap, self.n))
        self._qtau = 1.0 / np.arange(1.0, cap + 1.0) ** 2
        self._cached_round = -1
        self._cached_flat: np.ndarray | None = None

    def _ensure_capacity(self, rows: int) -> None:
        cap = self._R.shape[0]
        if rows <= cap:
            return
        new_cap = max(rows, 2 * cap)
        grow = lambda a: np.vstack([a, np.zeros((new_cap - cap, self.n))])  # noqa: E731
        self._R, self._C = grow(self._R), grow(self._C)
        self._qtau = 1.0 / np.arange(1.0, new_cap + 1.0) ** 2

    @property
    def n_sleeping(self) -> int:
        """Number of live copies: one per (birth round, base expert) pair."""
        return self.n * self.t

    def copy_state(self, tau: int, i: int) -> tuple[float, float]:
        """Accumulators of the copy born at round tau (1-based) for expert i."""
        if not (1 <= tau <= self.t):
            raise ValueError(f"birth round {tau} not in [1, {self.t}]")
        return float(self._R[tau - 1, i]), float(self._C[tau - 1, i])

    def _flat_prediction(self, t: int) -> np.ndarray:
        """Per-copy prediction weights for round t, rows 1..t, row-major."""
        if self._cached_round == t and self._cached_flat is not None:
            return self._cached_flat
        self._ensure_capacity(t)
        s = self._qtau[:t, None] * weight_arr(self._R[:t], self._C[:t])
        total = s.sum()
        p = s / total  # fresh copies keep the total strictly positive
        self._cached_round = t
        self._cached_flat = p
        return p

    def predict(self) -> np.ndarray:
        """Distribution over base experts for the upcoming round."""
        p = self._flat_prediction(self.t + 1)
        return p.sum(axis=0)

    def update(self, losses) -> float:
        """Consume one round of base-expert losses, return the player loss."""
        losses = np.asarray(losses, dtype=float)
        if losses.shape != (self.n,):
            raise ValueError(f"losses must have shape ({self.n},)")
        if np.any(losses < 0.0) or np.any(losses > 1.0) or not np.all(np.isfinite(losses)):
            raise ValueError("losses must lie in [0, 1]")
        t = self.t + 1
        p = self._flat_prediction(t)
        player_loss = float(np.dot(p.ravel(), np.tile(losses, t)))
        r = player_loss - np.broadcast_to(losses, (t, self.n))
        self._R[:t] += r
        self._C[:t] += np.abs(r)
        self.t = t
        return player_loss

    def potential_sum(self) -> float:
        """Normalized-prior potential sum over all live copies."""
        if self.t == 0:
            return 1.0
        t = self.t
        zq = self.n * self._qtau[:t].sum()
        return float((self._qtau[:t, None] * phi_arr(self._R[:t], self._C[:t])).sum() / zq)

    def certificate(self) -> float:
        """Round-by-round upper bound for the potential sum over live copies."""
        if self.t == 0:
            return 2.5
        t = self.t
        zq = self.n * self._qtau[:t].sum()
        return 1.0 + 1.5 * float((self._qtau[:t, None] * (1.0 + np.log1p(self._C[:t]))).sum() / zq)


# ---------------------------------------------------------------------------
# Interval regret and its certificates, computed from a recorded trace.
# Rounds are 1-based; losses is the (T, N) loss matrix and player_losses the
# length-T player loss sequence.
# ---------------------------------------------------------------------------


def _validate_trace(player_losses, losses):
    player_losses = np.asarray(player_losses, dtype=float)
    losses = np.asarray(losses, dtype=float)
    if losses.ndim != 2 or player_losses.ndim != 1 or losses.shape[0] != player_losses.size:
        raise ValueError("trace shapes do not match")
    return player_losses, losses


def adaptive_regret(player_losses, losses, t1: int, t2: int, i: int) -> float:
    """Regret to expert i over rounds t1..t2 inclusive (1-based)."""
    player_losses, losses = _validate_trace(player_losses, losses)
    T, N = losses.shape
    if not (1 <= t1 <= t2 <= T):
        raise ValueError(f"need 1 <= t1 <= t2 <= {T}, got [{t1}, {t2}]")
    if not (0 <= i < N):
        raise ValueError(f"expert index {i} out of range")
    return float(np.sum(player_losses[t1 - 1 : t2] - losses[t1 - 1 : t2, i]))


def _prefixes(player_losses, losses):
    r = player_losses[:, None] - losses
    pref_r = np.vstack([np.zeros(losses.shape[1]), np.cumsum(r, axis=0)])
    pref_a = np.vstack([np.zeros(losses.shape[1]), np.cumsum(np.abs(r), axis=0)])
    return pref_r, pref_a


def _certificate_at(pref_a, qtau, zeta, t2: int, n: int) -> float:
    # potential-sum cap over the n*t2 copies alive at the end of round t2
    c_mat = pref_a[t2][None, :] - pref_a[0:t2]
    zq = n * zeta[t2]
    return 1.0 + 1.5 * float((qtau[:t2, None] * (1.0 + np.log1p(c_mat))).sum() / zq)


def interval_bound(player_losses, losses, t1: int, t2: int, i: int) -> float:
    """Certificate for the interval regret of the copy born at t1 for expert i.

    sqrt(3 * C_[t1,t2],i * (ln(1/q_(t1)) + ln B' + ln(1 + ln(N*t2)))) where
    q_(t1) is the normalized 1/t1^2 prior over the N*t2 copies alive at t2 and
    B' is their potential-sum cap.
    """
    player_losses, losses = _validate_trace(player_losses, losses)
    T, N = losses.shape
    if not (1 <= t1 <= t2 <= T):
        raise ValueError(f"need 1 <= t1 <= t2 <= {T}, got [{t1}, {t2}]")
    pref_r, pref_a = _prefixes(player_losses, losses)
    qtau = 1.0 / np.arange(1.0, T + 1.0) ** 2
    zeta = np.concatenate([[0.0], np.cumsum(qtau)])
    c_int = float(pref_a[t2, i] - pref_a[t1 - 1, i])
    ln_inv_q = math.log(N * zeta[t2]) + 2.0 * math.log(t1)
    ln_b = math.log(_certificate_at(pref_a, qtau, zeta, t2, N))
    lll = math.log(1.0 + math.log(N * t2))
    return math.sqrt(3.0 * c_int * (ln_inv_q + ln_b + lll))


def check_all_interval_bounds(player_losses, losses, rel_tol: float = 1e-9):
    """Verify realized interval regret against its certificate on every
    (t1, t2, expert) triple; returns (checked, failures, worst_margin)."""
    player_losses, losses = _validate_trace(player_losses, losses)
    T, N = losses.shape
    pref_r, pref_a = _prefixes(player_losses, losses)
    qtau = 1.0 / np.arange(1.0, T + 1.0) ** 2
    zeta = np.concatenate([[0.0], np.cumsum(qtau)])
    log_t1 = np.log(np.arange(1.0, T + 1.0))
    checked = 0
    failures = 0
    worst = math.inf
    for t2 in range(1, T + 1):
        ln_b = math.log(_certificate_at(pref_a, qtau, zeta, t2, N))
        lll = math.log(1.0 + math.log(N * t2))
        ln_inv_q = math.log(N * zeta[t2]) + 2.0 * log_t1[:t2]
        r_int = pref_r[t2][None, :] - pref_r[0:t2]
        c_int = pref_a[t2][None, :] - pref_a[0:t2]
        bound = np.sqrt(3.0 * c_int * (ln_inv_q[:, None] + ln_b + lll))
        margin = bound - r_int + rel_tol * np.abs(bound)
        checked += margin.size
        failures += int(np.sum(margin < 0.0))
        worst = min(worst, float(margin.min()))
    return checked, failures, worst
