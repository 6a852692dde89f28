"""Loss generators, exact oracles, baselines, and trace metrics.

Randomness runs through PCG64 with explicit stream splitting: every generator
derives its bit stream from SeedSequence(seed, stream_tag), so the loss matrix
for a given (seed, scenario) is one fixed object that every algorithm replays
identically (oblivious adversary), while competitor draws and tree inputs live
on separate streams.  Reserved tags: 0 losses, 1 competitor draws, 2 tree
inputs; verification suites use tags of 5 and above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "STREAM_LOSSES",
    "STREAM_COMPETITORS",
    "STREAM_TREE",
    "rng_for",
    "LossTrace",
    "gen_adversarial",
    "gen_stochastic_gap",
    "gen_shifting",
    "quantile_competitor",
    "KShiftResult",
    "kshift_oracle",
    "kshift_bruteforce",
    "variation",
    "decomposition_value",
    "decomposition_bruteforce",
    "timevarying_regret",
    "tv_bound",
    "HedgeLearner",
    "RunRecord",
    "play",
    "truncated_loss_totals",
    "first_order_bound",
    "TRACE_COLUMNS",
]

STREAM_LOSSES = 0
STREAM_COMPETITORS = 1
STREAM_TREE = 2


def rng_for(seed: int, stream: int = STREAM_LOSSES) -> np.random.Generator:
    """PCG64 generator on the (seed, stream) pair; portable and replayable."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass
class LossTrace:
    """A (T, N) loss matrix in [0, 1] plus the recipe that produced it."""

    losses: np.ndarray
    seed: int
    kind: str
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return self.losses.shape[0]

    @property
    def N(self) -> int:
        return self.losses.shape[1]


def _check_dims(n: int, t: int) -> None:
    if n <= 0 or t <= 0:
        raise ValueError(f"need positive N and T, got N={n}, T={t}")


def gen_adversarial(n: int, t: int, seed: int) -> LossTrace:
    """I.i.d. uniform-[0,1] losses; same seed reproduces the matrix exactly."""
    _check_dims(n, t)
    rng = rng_for(seed, STREAM_LOSSES)
    return LossTrace(rng.random((t, n)), seed, "adversarial")


def gen_shifting(n: int, t: int, k: int, alpha: float, mu: float, seed: int) -> LossTrace:
    """K equal segments, each with its own gap-alpha Bernoulli best expert.

    Within segment j the designated expert draws Bernoulli(mu) losses and all
    others Bernoulli(mu + alpha).  meta carries the segment cut points
    [0, ..., T] and the designated expert per segment.  With k=1 no segment
    experts are drawn, so the output matches gen_stochastic_gap draw for draw.
    """
    _check_dims(n, t)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if not (0.0 <= mu <= 1.0 - alpha):
        raise ValueError(f"mu must be in [0, 1 - alpha], got {mu}")
    if not (1 <= k <= t):
        raise ValueError(f"k must be in [1, T], got {k}")
    rng = rng_for(seed, STREAM_LOSSES)
    if k == 1:
        experts = [0]
    else:
        experts = []
        for _ in range(k):
            i = int(rng.integers(0, n))
            while experts and n > 1 and i == experts[-1]:
                i = int(rng.integers(0, n))
            experts.append(i)
    base, extra = divmod(t, k)
    bounds = [0]
    for j in range(k):
        bounds.append(bounds[-1] + base + (1 if j < extra else 0))
    probs = np.full((t, n), mu + alpha)
    for j in range(k):
        probs[bounds[j] : bounds[j + 1], experts[j]] = mu
    losses = (rng.random((t, n)) < probs).astype(float)
    return LossTrace(losses, seed, "shifting", {"boundaries": bounds, "experts": experts})


def gen_stochastic_gap(n: int, t: int, alpha: float, mu: float, seed: int) -> LossTrace:
    """Expert 0 draws Bernoulli(mu); every other expert Bernoulli(mu + alpha)."""
    trace = gen_shifting(n, t, 1, alpha, mu, seed)
    return LossTrace(trace.losses, seed, "stochastic", trace.meta)


def quantile_competitor(total_losses, eps: float) -> int:
    """Index of the ceil(N*eps)-th best expert by total loss; ties to lower index."""
    total_losses = np.asarray(total_losses, dtype=float)
    n = total_losses.size
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    rank = math.ceil(n * eps)
    order = np.argsort(total_losses, kind="stable")
    return int(order[rank - 1])


@dataclass
class KShiftResult:
    loss: float
    boundaries: list[int]  # cut points 0 = b_0 < b_1 < ... < b_K = T
    experts: list[int]  # best expert per segment (b_j, b_{j+1}]
    truncated_loss: float | None = None  # witness total of [loss - player_loss]_+


def kshift_oracle(losses, k: int, player_losses=None) -> KShiftResult:
    """Exact minimum total loss over K-segment partitions with one expert each.

    The loss-minimizing partition is also the regret-maximizing segmented
    competitor, which is the object the shifting bounds refer to.  Segment
    programming with per-expert running minima: O(K*T*N) time.  When
    player_losses is supplied, the witness partition's truncated loss (the sum
    of positive parts of loss minus player loss) is reported as well.
    """
    losses = np.asarray(losses, dtype=float)
    t_len, n = losses.shape
    if not (1 <= k <= t_len):
        raise ValueError(f"k must be in [1, T], got {k}")
    pref = np.vstack([np.zeros(n), np.cumsum(losses, axis=0)])
    inf = math.inf
    dp = np.full((k + 1, t_len + 1), inf)
    dp[0, 0] = 0.0
    pick_i = np.zeros((k + 1, t_len + 1), dtype=int)
    pick_s = np.zeros((k + 1, t_len + 1), dtype=int)
    for j in range(1, k + 1):
        best_val = np.full(n, inf)  # min over s of dp[j-1, s] - pref[s, i]
        best_s = np.zeros(n, dtype=int)
        for t in range(j, t_len + 1):
            s = t - 1
            if math.isfinite(dp[j - 1, s]):
                cand = dp[j - 1, s] - pref[s]
                better = cand < best_val
                best_val[better] = cand[better]
                best_s[better] = s
            totals = pref[t] + best_val
            i_star = int(np.argmin(totals))
            dp[j, t] = totals[i_star]
            pick_i[j, t] = i_star
            pick_s[j, t] = best_s[i_star]
    boundaries = [t_len]
    experts: list[int] = []
    t = t_len
    for j in range(k, 0, -1):
        experts.append(int(pick_i[j, t]))
        t = int(pick_s[j, t])
        boundaries.append(t)
    boundaries.reverse()
    experts.reverse()
    truncated = None
    if player_losses is not None:
        player_losses = np.asarray(player_losses, dtype=float)
        truncated = 0.0
        for j in range(k):
            seg = slice(boundaries[j], boundaries[j + 1])
            gap = losses[seg, experts[j]] - player_losses[seg]
            truncated += float(np.sum(np.maximum(gap, 0.0)))
    return KShiftResult(float(dp[k, t_len]), boundaries, experts, truncated)


def kshift_bruteforce(losses, k: int) -> float:
    """Reference optimum by enumerating all partitions and expert choices."""
    from itertools import combinations

    losses = np.asarray(losses, dtype=float)
    t_len, n = losses.shape
    if not (1 <= k <= t_len):
        raise ValueError(f"k must be in [1, T], got {k}")
    pref = np.vstack([np.zeros(n), np.cumsum(losses, axis=0)])
    best = math.inf
    for cuts in combinations(range(1, t_len), k - 1):
        bounds = [0, *cuts, t_len]
        seg_min = sum(float(np.min(pref[bounds[j + 1]] - pref[bounds[j]])) for j in range(k))
        best = min(best, seg_min)
    return best


def variation(useq) -> float:
    """Total upward movement of a competitor sequence, with u_0 = 0."""
    useq = np.asarray(useq, dtype=float)
    if np.any(useq < 0.0):
        raise ValueError("competitor sequence entries must be nonnegative")
    diffs = np.diff(useq, axis=0, prepend=np.zeros((1, useq.shape[1])))
    return float(np.sum(np.maximum(diffs, 0.0)))


def decomposition_value(v) -> float:
    """Minimum total weight of an interval cover reproducing v: sum of positive jumps."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0.0):
        raise ValueError("values must be nonnegative")
    diffs = np.diff(v, prepend=0.0)
    return float(np.sum(np.maximum(diffs, 0.0)))


def decomposition_bruteforce(v) -> float:
    """Reference minimum via a linear program over all contiguous intervals.

    Variables are one nonnegative weight per interval [s, e]; constraints force
    the weighted interval indicators to reproduce v exactly.
    """
    v = np.asarray(v, dtype=float)
    t_len = v.size
    intervals = [(s, e) for s in range(t_len) for e in range(s, t_len)]
    a_eq = np.zeros((t_len, len(intervals)))
    for j, (s, e) in enumerate(intervals):
        a_eq[s : e + 1, j] = 1.0
    res = linprog(
        c=np.ones(len(intervals)),
        A_eq=a_eq,
        b_eq=v,
        bounds=[(0.0, None)] * len(intervals),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"interval cover program failed: {res.message}")
    return float(res.fun)


def timevarying_regret(player_losses, losses, useq) -> float:
    """Regret against a sequence of nonnegative competitor vectors."""
    player_losses = np.asarray(player_losses, dtype=float)
    losses = np.asarray(losses, dtype=float)
    useq = np.asarray(useq, dtype=float)
    if useq.shape != losses.shape:
        raise ValueError(f"competitor sequence shape {useq.shape} != losses shape {losses.shape}")
    r = player_losses[:, None] - losses
    return float(np.sum(useq * r))


def tv_bound(player_losses, losses, useq, a_coeff: float, z_kind: str = "abs_regret") -> float:
    """sqrt(A * V(u) * sum_t u_t . z_t) with z the per-round comparison scale.

    z_kind 'abs_regret' uses |player_loss - loss|; 'excess_loss' uses
    [loss - player_loss]_+.  a_coeff is the caller's interval-regret constant.
    """
    player_losses = np.asarray(player_losses, dtype=float)
    losses = np.asarray(losses, dtype=float)
    useq = np.asarray(useq, dtype=float)
    if useq.shape != losses.shape:
        raise ValueError(f"competitor sequence shape {useq.shape} != losses shape {losses.shape}")
    r = player_losses[:, None] - losses
    if z_kind == "abs_regret":
        z = np.abs(r)
    elif z_kind == "excess_loss":
        z = np.maximum(-r, 0.0)
    else:
        raise ValueError(f"unknown z_kind {z_kind!r}")
    return math.sqrt(a_coeff * variation(useq) * float(np.sum(useq * z)))


def truncated_loss_totals(player_losses, losses) -> np.ndarray:
    """Per-expert totals of [loss - player_loss]_+; never exceeds the raw totals."""
    player_losses = np.asarray(player_losses, dtype=float)
    losses = np.asarray(losses, dtype=float)
    return np.sum(np.maximum(losses - player_losses[:, None], 0.0), axis=0)


def first_order_bound(u, ltilde_totals, a_coeff: float) -> float:
    """sqrt(2 (u . Ltilde) A) + A: horizon-free form of the regret guarantee."""
    u = np.asarray(u, dtype=float)
    lt = np.asarray(ltilde_totals, dtype=float)
    if math.isinf(a_coeff):
        return math.inf
    return math.sqrt(2.0 * float(np.dot(u, lt)) * a_coeff) + a_coeff


# ---------------------------------------------------------------------------
# Exponential-weights baseline with an anytime learning-rate schedule.
# ---------------------------------------------------------------------------


def default_eta_schedule(n: int) -> Callable[[int], float]:
    """eta_t = sqrt(8 ln(N) / t); the standard horizon-free choice."""
    ln_n = math.log(n)
    return lambda t: math.sqrt(8.0 * ln_n / t)


class HedgeLearner:
    """Exponential weights: p_{t,i} proportional to q_i exp(-eta_t L_{t-1,i})."""

    def __init__(self, n: int, eta_schedule: Callable[[int], float] | None = None, prior=None):
        if n < 1:
            raise ValueError("need at least one expert")
        self.n = int(n)
        self.q = np.full(self.n, 1.0 / self.n) if prior is None else np.asarray(prior, dtype=float) / np.sum(prior)
        self.eta_schedule = eta_schedule if eta_schedule is not None else default_eta_schedule(self.n)
        self.L = np.zeros(self.n)
        self.t = 0

    def predict(self) -> np.ndarray:
        if self.n == 1:
            return np.ones(1)
        eta = float(self.eta_schedule(self.t + 1))
        if not (eta > 0.0 and math.isfinite(eta)):
            raise ValueError(f"learning rate must be positive, got {eta} at round {self.t + 1}")
        scores = -eta * (self.L - self.L.min())
        w = self.q * np.exp(scores)
        return w / w.sum()

    def update(self, losses) -> float:
        losses = np.asarray(losses, dtype=float)
        if losses.shape != (self.n,):
            raise ValueError(f"losses must have shape ({self.n},)")
        if np.any(losses < 0.0) or np.any(losses > 1.0) or not np.all(np.isfinite(losses)):
            raise ValueError("losses must lie in [0, 1]")
        p = self.predict()
        player_loss = float(np.dot(p, losses))
        self.L += losses
        self.t += 1
        return player_loss


# ---------------------------------------------------------------------------
# Trace driver.
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    """Per-round record of one learner on one loss trace."""

    player_losses: np.ndarray
    losses: np.ndarray
    potential_sums: np.ndarray | None = None
    certificates: np.ndarray | None = None

    @property
    def cum_player(self) -> np.ndarray:
        return np.cumsum(self.player_losses)

    def certificate_violations(self, rel_tol: float = 1e-9) -> int:
        if self.potential_sums is None or self.certificates is None:
            return 0
        slack = self.certificates * (1.0 + rel_tol) - self.potential_sums
        return int(np.sum(slack < 0.0))


def play(learner, losses, adversary: Callable | None = None, certificates: bool = False) -> RunRecord:
    """Drive a learner through a loss matrix, or an adaptive adversary callback.

    losses is a (T, N) matrix; when adversary is given it must be a callable
    (t, p) -> loss vector and losses is interpreted as the horizon via its
    first dimension (the produced losses are recorded and returned).  With
    certificates=True the per-round potential sum and its cap are recorded
    (learners without those methods yield None entries).
    """
    if adversary is None:
        losses = np.asarray(losses, dtype=float)
        t_len = losses.shape[0]
        realized = losses
    else:
        t_len = int(losses)
        realized = None
    record = certificates and hasattr(learner, "potential_sum") and hasattr(learner, "certificate")
    player = np.empty(t_len)
    pots = np.empty(t_len) if record else None
    certs = np.empty(t_len) if record else None
    rows = []
    for t in range(t_len):
        if adversary is None:
            lvec = realized[t]
        else:
            p = learner.predict()
            lvec = np.asarray(adversary(t, p), dtype=float)
            rows.append(lvec)
        player[t] = learner.update(lvec)
        if record:
            pots[t] = learner.potential_sum()
            certs[t] = learner.certificate()
    if adversary is not None:
        realized = np.vstack(rows)
    return RunRecord(player, realized, pots, certs)


TRACE_COLUMNS = [
    "t",
    "algo",
    "player_loss",
    "cum_player_loss",
    "regret_best",
    "regret_quantile_eps",
    "potential_sum",
    "certificate_B",
    "bound_eq1",
]
