"""Closed-form event-pattern expectations and their Monte Carlo checks.

For a frozen history up to time t, the chance that designated nodes fire
exactly once each in consecutive width-eps bins factorizes, to leading
order, into a product over the bins: each factor is the node's intensity at
t plus the jumps contributed by the pattern's earlier bins.  The functions
here expose those products (``predicted_pair``, ``predicted_triple``, the
general ``predicted_pattern``) and estimate the true indicator expectations
by simulating many continuations of the history (``mc_indicator``,
``mc_delta_drift``).

The estimator runs the same thinning scheme as the simulator, vectorized
across continuations in chunks; models with modulated kernels fall back to
one continuation at a time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model import HawkesModel
from .simulation import (
    DominatingRateError,
    EventLog,
    IntensityTracker,
    build_tracker,
    child_seed,
    intensity,
    simulate_continuation,
)

__all__ = [
    "ExpectationReport",
    "DriftReport",
    "predicted_pair",
    "predicted_triple",
    "predicted_pattern",
    "drift_matrix",
    "mc_indicator",
    "mc_delta_drift",
    "within_envelope",
]

_PATTERNS = ("ij", "ji", "iij", "iji", "jii")


def predicted_pattern(model: HawkesModel, lam: dict[int, float], nodes: tuple[int, ...]) -> float:
    """Leading coefficient for an arbitrary firing order.

    ``nodes`` lists which node fires in each bin.  The factor for bin k is
    that node's intensity plus one jump weight for every earlier bin.
    """
    out = 1.0
    for k, v in enumerate(nodes):
        out *= lam[v] + sum(model.weight(v, u) for u in nodes[:k])
    return out


def predicted_pair(model: HawkesModel, i: int, j: int, lam_i: float, lam_j: float) -> float:
    """Coefficient of eps^2 for "i fires once, then j fires once"."""
    return lam_i * (lam_j + model.weight(j, i))


def predicted_triple(
    model: HawkesModel, i: int, j: int, lam_i: float, lam_j: float, pattern: str
) -> float:
    """Coefficient of eps^3 for the three-bin patterns over nodes i and j."""
    w_on_i = model.weight(i, j)
    w_on_j = model.weight(j, i)
    w_self = model.weight(i, i)
    if pattern == "jii":
        return lam_j * (lam_i + w_on_i) * (lam_i + w_on_i + w_self)
    if pattern == "iji":
        return lam_i * (lam_j + w_on_j) * (lam_i + w_self + w_on_i)
    if pattern == "iij":
        return lam_i * (lam_i + w_self) * (lam_j + 2.0 * w_on_j)
    raise ValueError(f"unknown triple pattern {pattern!r}")


def drift_matrix(model: HawkesModel, i: int, j: int) -> tuple[np.ndarray, float]:
    """The 2x2 map from (lam_i, lam_j) to the leading drifts of the pair and
    triple statistics for ordered pair (i, j), plus its determinant.

    The determinant is computed both directly and through its factored form
    weight(j,i) * weight(i,j) * (weight(i,i) - weight(i,j)); disagreement
    beyond 1e-12 means a bookkeeping bug and raises.
    """
    a = model.weight(j, i)  # effect of i on j
    b = model.weight(i, j)  # effect of j on i
    c = model.weight(i, i)
    m = np.array([[a, -b], [-2.0 * a * b, b * (c + b)]])
    det_direct = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    det_factored = a * b * (c - b)
    if abs(det_direct - det_factored) > 1e-12:
        raise ArithmeticError(
            f"determinant routes disagree: {det_direct!r} vs {det_factored!r}"
        )
    return m, det_direct


@dataclass(frozen=True)
class ExpectationReport:
    """Monte Carlo estimate of one pattern expectation against its prediction."""

    pattern: str
    estimate: float
    stderr: float
    predicted: float
    discrepancy: float
    trials: int
    epsilon: float

    @property
    def order(self) -> int:
        """Power of eps in the prediction (2 for pairs, 3 for triples)."""
        return len(self.pattern)

    def __str__(self) -> str:
        return (
            f"{self.pattern:4s} estimate={self.estimate:.6e} (se {self.stderr:.2e})  "
            f"predicted={self.predicted:.6e}  discrepancy={self.discrepancy:.2e}  "
            f"N={self.trials}"
        )


@dataclass(frozen=True)
class DriftReport:
    """Monte Carlo drifts of the signed window statistics for one pair.

    Estimates are normalized: the pair statistic by eps^2, the triple
    statistic by eps^3, matching the predictions from ``drift_matrix``.
    """

    pair_estimate: float
    pair_stderr: float
    pair_predicted: float
    triple_estimate: float
    triple_stderr: float
    triple_predicted: float
    trials: int
    epsilon: float

    def __str__(self) -> str:
        return (
            f"pair drift   {self.pair_estimate:+.5f} (se {self.pair_stderr:.5f}) "
            f"vs predicted {self.pair_predicted:+.5f}\n"
            f"triple drift {self.triple_estimate:+.5f} (se {self.triple_stderr:.5f}) "
            f"vs predicted {self.triple_predicted:+.5f}"
        )


def within_envelope(
    report: ExpectationReport,
    max_degree: int,
    lam_max: float,
    constant: float = 100.0,
) -> bool:
    """Whether the discrepancy is explained by the expansion error plus noise.

    The deterministic part of the envelope scales like
    (degree * intensity * eps) to the power (order + 1); four standard
    errors cover the Monte Carlo noise.
    """
    scale = max(max_degree, 1) * lam_max * report.epsilon
    return report.discrepancy <= constant * scale ** (report.order + 1) + 4.0 * report.stderr


# ---------------------------------------------------------------------------
# Continuation engines.  Both yield int16 occupancy chunks of shape
# (chunk, n, nbins): how many times each node fired in each bin of the
# continuation window.

def _empty_log(n: int, horizon: float) -> EventLog:
    return EventLog(n=n, horizon=horizon, times=np.array([]), nodes=np.array([], dtype=np.int64))


def _chunks_vectorized(
    model: HawkesModel,
    tracker: IntensityTracker,
    t0: float,
    epsilon: float,
    nbins: int,
    trials: int,
    seed: int,
    chunk_size: int,
) -> Iterator[np.ndarray]:
    n = model.n
    weight = np.asarray(model.weight_matrix)
    beta = np.array([[model.kernel(i, j).decay for j in range(n)] for i in range(n)])
    base0 = np.zeros((n, n))
    for j, ix in enumerate(tracker._by_source):
        if ix.size:
            base0[tracker._tgt[ix], j] = tracker._val[ix]
    levels = tracker._levels
    amps = tracker._amps
    freqs = tracker._freqs
    phases = tracker._phases
    all_const = tracker.all_constant
    slope = model.constants.log_slope_bound
    duration = nbins * epsilon

    def baselines(times: np.ndarray) -> np.ndarray:
        if all_const:
            return np.broadcast_to(levels, (times.size, n))
        return levels + amps * np.sin(freqs * times[:, None] + phases)

    done = 0
    chunk_index = 0
    while done < trials:
        m = min(chunk_size, trials - done)
        rng = np.random.default_rng(child_seed(seed, chunk_index))
        occ = np.zeros((m, n, nbins), dtype=np.int16)
        s = np.zeros(m)
        state = np.broadcast_to(base0, (m, n, n)).copy()
        rows = np.arange(m)
        iterations = 0
        while rows.size:
            iterations += 1
            if iterations > 1_000_000:
                raise RuntimeError("thinning failed to terminate inside the window")
            mu = baselines(t0 + s)
            growth = 1.0 if all_const else np.exp(slope * (duration - s))
            bound = mu.sum(axis=1) * growth + (state * weight).sum(axis=(1, 2))
            wait = rng.standard_exponential(rows.size) / bound
            s = s + wait
            alive = s < duration
            rows, s, wait, bound = rows[alive], s[alive], wait[alive], bound[alive]
            state = state[alive]
            if not rows.size:
                break
            state *= np.exp(-beta * wait[:, None, None])
            lam = baselines(t0 + s) + (state * weight).sum(axis=2)
            lam_tot = lam.sum(axis=1)
            if np.any(lam_tot > bound * (1.0 + 1e-9)):
                raise DominatingRateError(
                    "intensity exceeded its dominating rate inside a continuation window"
                )
            accept = rng.random(rows.size) * bound < lam_tot
            if np.any(accept):
                lam_acc = lam[accept]
                draw = rng.random(int(accept.sum())) * lam_tot[accept]
                node = (np.cumsum(lam_acc, axis=1) < draw[:, None]).sum(axis=1)
                np.minimum(node, n - 1, out=node)
                rel = s[accept]
                b = np.floor(rel / epsilon).astype(np.int64)
                b -= rel < b * epsilon
                b += rel >= (b + 1) * epsilon
                np.clip(b, 0, nbins - 1, out=b)
                np.add.at(occ, (rows[accept], node, b), 1)
                state[np.nonzero(accept)[0], :, node] += 1.0
        yield occ
        done += m
        chunk_index += 1


def _chunks_sequential(
    model: HawkesModel,
    tracker: IntensityTracker,
    t0: float,
    epsilon: float,
    nbins: int,
    trials: int,
    seed: int,
    chunk_size: int,
) -> Iterator[np.ndarray]:
    rng = np.random.default_rng(child_seed(seed, 0))
    duration = nbins * epsilon
    done = 0
    while done < trials:
        m = min(chunk_size, trials - done)
        occ = np.zeros((m, model.n, nbins), dtype=np.int16)
        for k in range(m):
            fresh = tracker.copy()
            times, nodes = simulate_continuation(model, fresh, duration, rng)
            for t, u in zip(times, nodes):
                rel = t - t0
                b = math.floor(rel / epsilon)
                if rel < b * epsilon:
                    b -= 1
                elif rel >= (b + 1) * epsilon:
                    b += 1
                occ[k, u, min(max(b, 0), nbins - 1)] += 1
        yield occ
        done += m


def _occupancy_chunks(
    model: HawkesModel,
    prefix: EventLog,
    t0: float,
    epsilon: float,
    nbins: int,
    trials: int,
    seed: int,
    engine: str,
    chunk_size: int,
) -> Iterator[np.ndarray]:
    tracker = build_tracker(model, prefix, t0)
    exponential = all(k.family == "exponential" for k in model.distinct_kernels)
    if engine == "auto":
        engine = "vectorized" if exponential else "sequential"
    if engine == "vectorized":
        if not exponential:
            raise ValueError("the vectorized engine handles exponential kernels only")
        return _chunks_vectorized(model, tracker, t0, epsilon, nbins, trials, seed, chunk_size)
    if engine == "sequential":
        return _chunks_sequential(model, tracker, t0, epsilon, nbins, trials, seed, chunk_size)
    raise ValueError(f"unknown engine {engine!r}")


def _pattern_mask(occ: np.ndarray, pattern: str, i: int, j: int) -> np.ndarray:
    node_of = {"i": i, "j": j}
    out = np.ones(occ.shape[0], dtype=bool)
    for b, ch in enumerate(pattern):
        out &= occ[:, node_of[ch], b] == 1
    return out


def _mean_and_stderr(total: float, total_sq: float, trials: int) -> tuple[float, float]:
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0)
    if trials > 1:
        var *= trials / (trials - 1)
    return mean, math.sqrt(var / trials)


def _resolve_prefix(model: HawkesModel, prefix: EventLog | None, t: float) -> EventLog:
    if prefix is None:
        return _empty_log(model.n, max(t, 1.0))
    if prefix.horizon < t:
        # Extend the clock so intensities can be queried at t; no events are
        # added, the history is simply known to be quiet after its horizon.
        return EventLog(
            n=prefix.n,
            horizon=t,
            times=prefix.times,
            nodes=prefix.nodes,
            seed=prefix.seed,
            fingerprint=prefix.fingerprint,
        )
    return prefix


def mc_indicator(
    model: HawkesModel,
    prefix: EventLog | None,
    t: float,
    epsilon: float,
    pattern: str,
    i: int,
    j: int,
    trials: int,
    seed: int = 0,
    engine: str = "auto",
    chunk_size: int = 1_000_000,
) -> ExpectationReport:
    """Estimate the expectation of one pattern indicator by simulation.

    Runs ``trials`` independent continuations of the frozen history from
    time t, each covering len(pattern) bins of width epsilon, and counts how
    often the pattern occurs.  The prediction is the eps-power times the
    closed-form coefficient at the frozen intensities.
    """
    if pattern not in _PATTERNS:
        raise ValueError(f"pattern must be one of {_PATTERNS}")
    if i == j or not (0 <= i < model.n and 0 <= j < model.n):
        raise ValueError("need two distinct valid nodes")
    if epsilon <= 0 or t < 0 or trials < 1:
        raise ValueError("bad epsilon, time, or trial count")
    if trials < 10_000:
        warnings.warn(
            f"{trials} continuations give a very noisy estimate; use at least 10000",
            UserWarning,
            stacklevel=2,
        )
    prefix = _resolve_prefix(model, prefix, t)
    lam_i = intensity(model, prefix, i, t)
    lam_j = intensity(model, prefix, j, t)
    nbins = len(pattern)
    node_of = {"i": i, "j": j}
    coeff = predicted_pattern(model, {i: lam_i, j: lam_j}, tuple(node_of[ch] for ch in pattern))
    predicted = epsilon**nbins * coeff
    if predicted >= 1.0:
        raise ValueError(
            f"epsilon={epsilon} is too coarse here: predicted probability {predicted:.3g}"
        )
    hits = 0
    for occ in _occupancy_chunks(model, prefix, t, epsilon, nbins, trials, seed, engine, chunk_size):
        hits += int(np.sum(_pattern_mask(occ, pattern, i, j)))
    estimate, stderr = _mean_and_stderr(float(hits), float(hits), trials)
    return ExpectationReport(
        pattern=pattern,
        estimate=estimate,
        stderr=stderr,
        predicted=predicted,
        discrepancy=abs(estimate - predicted),
        trials=trials,
        epsilon=epsilon,
    )


def mc_delta_drift(
    model: HawkesModel,
    prefix: EventLog | None,
    t: float,
    epsilon: float,
    i: int,
    j: int,
    trials: int,
    seed: int = 0,
    engine: str = "auto",
    chunk_size: int = 1_000_000,
) -> DriftReport:
    """Estimate the normalized drifts of both signed statistics for (i, j).

    Each continuation covers one three-bin window; the signed pair and
    triple counts are averaged and scaled by eps^-2 and eps^-3, then
    compared against the drift-matrix predictions at the frozen intensities.
    """
    if i == j or not (0 <= i < model.n and 0 <= j < model.n):
        raise ValueError("need two distinct valid nodes")
    if epsilon <= 0 or t < 0 or trials < 1:
        raise ValueError("bad epsilon, time, or trial count")
    prefix = _resolve_prefix(model, prefix, t)
    lam_i = intensity(model, prefix, i, t)
    lam_j = intensity(model, prefix, j, t)
    sum1 = sumsq1 = sum2 = sumsq2 = 0.0
    for occ in _occupancy_chunks(model, prefix, t, epsilon, 3, trials, seed, engine, chunk_size):
        d1 = _pattern_mask(occ, "ij", i, j).astype(np.int64) - _pattern_mask(occ, "ji", i, j)
        d2 = (
            _pattern_mask(occ, "iij", i, j).astype(np.int64)
            - 2 * _pattern_mask(occ, "iji", i, j)
            + _pattern_mask(occ, "jii", i, j)
        )
        sum1 += float(d1.sum())
        sumsq1 += float((d1 * d1).sum())
        sum2 += float(d2.sum())
        sumsq2 += float((d2 * d2).sum())
    mean1, se1 = _mean_and_stderr(sum1, sumsq1, trials)
    mean2, se2 = _mean_and_stderr(sum2, sumsq2, trials)
    m, _ = drift_matrix(model, i, j)
    predicted = m @ np.array([lam_i, lam_j])
    return DriftReport(
        pair_estimate=mean1 / epsilon**2,
        pair_stderr=se1 / epsilon**2,
        pair_predicted=float(predicted[0]),
        triple_estimate=mean2 / epsilon**3,
        triple_stderr=se2 / epsilon**3,
        triple_predicted=float(predicted[1]),
        trials=trials,
        epsilon=epsilon,
    )
