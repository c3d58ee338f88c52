"""Model types for multivariate Hawkes processes with time-varying structure.

A model bundles per-node baseline rates, per-pair excitation weights and
delay kernels, and the declared constants (floors, caps, smoothness and
stability bounds) that the rest of the package checks against.  Weight
convention: ``weights[(i, j)]`` is the jump added to node i's intensity by
an event of node j, so row i collects everything that excites node i.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
import yaml
from scipy.integrate import quad

__all__ = [
    "BaselineSpec",
    "KernelSpec",
    "ModelConstants",
    "HawkesModel",
    "DependencyGraph",
    "AssumptionCheck",
    "ValidationReport",
    "validate_model",
    "true_graph",
    "load_model",
    "save_model",
]

_BASELINE_FAMILIES = ("constant", "sinusoidal")
_KERNEL_FAMILIES = ("exponential", "modulated")


@dataclass(frozen=True)
class BaselineSpec:
    """Deterministic baseline rate of one node.

    ``constant``: rate(t) = level.
    ``sinusoidal``: rate(t) = level + amplitude * sin(frequency * t + phase),
    which stays positive when level > |amplitude|.
    """

    family: str
    level: float
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in _BASELINE_FAMILIES:
            raise ValueError(f"unknown baseline family {self.family!r}")
        if self.level <= 0:
            raise ValueError("baseline level must be positive")
        if self.family == "sinusoidal" and abs(self.amplitude) >= self.level:
            raise ValueError("sinusoidal baseline needs level > |amplitude|")

    def value(self, t):
        """Rate at time t (scalar or ndarray). Rejects negative scalar t."""
        if np.isscalar(t) and t < 0:
            raise ValueError("baseline evaluated at negative time")
        if self.family == "constant":
            return self.level if np.isscalar(t) else np.full_like(np.asarray(t, float), self.level)
        return self.level + self.amplitude * np.sin(self.frequency * np.asarray(t) + self.phase)

    def floor(self) -> float:
        """Infimum of the rate over all times."""
        if self.family == "constant":
            return self.level
        return self.level - abs(self.amplitude)

    def cap(self) -> float:
        """Supremum of the rate over all times."""
        if self.family == "constant":
            return self.level
        return self.level + abs(self.amplitude)


@dataclass(frozen=True)
class KernelSpec:
    """Delay kernel phi(t, s) for an event at time s observed at time t >= s.

    ``exponential``: phi(t, s) = exp(-decay * (t - s)).
    ``modulated``: the decay rate depends on the event time,
    rate(s) = decay + decay_amplitude * sin(decay_frequency * s) and
    phi(t, s) = exp(-rate(s) * (t - s)).  Requires decay > |decay_amplitude| > 0
    so the rate never vanishes.  Both families satisfy phi(s, s) = 1 exactly.
    """

    family: str
    decay: float
    decay_amplitude: float = 0.0
    decay_frequency: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in _KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.decay <= 0:
            raise ValueError("kernel decay must be positive")
        if self.family == "modulated":
            if not (0 < abs(self.decay_amplitude) < self.decay):
                raise ValueError("modulated kernel needs decay > |decay_amplitude| > 0")

    def rate(self, s):
        """Decay rate applied to an event at time s."""
        if self.family == "exponential":
            return self.decay if np.isscalar(s) else np.full_like(np.asarray(s, float), self.decay)
        return self.decay + self.decay_amplitude * np.sin(self.decay_frequency * np.asarray(s))

    def rate_floor(self) -> float:
        if self.family == "exponential":
            return self.decay
        return self.decay - abs(self.decay_amplitude)

    def rate_cap(self) -> float:
        if self.family == "exponential":
            return self.decay
        return self.decay + abs(self.decay_amplitude)

    def value(self, t, s):
        """phi(t, s). Scalar t < s is rejected; arrays are assumed valid."""
        if np.isscalar(t) and np.isscalar(s):
            if s < 0:
                raise ValueError("kernel evaluated at negative event time")
            if t < s:
                raise ValueError("kernel evaluated before its event time")
        return np.exp(-self.rate(s) * (np.asarray(t) - np.asarray(s)))

    def integral(self, t: float, lower: float = 0.0) -> float:
        """integral of phi(t, x) dx over x in [lower, t].

        Closed form for the exponential family; adaptive quadrature with
        absolute tolerance 1e-10 for the modulated family.
        """
        if not 0.0 <= lower <= t:
            raise ValueError("integral needs 0 <= lower <= t")
        if t == lower:
            return 0.0
        if self.family == "exponential":
            return (1.0 - math.exp(-self.decay * (t - lower))) / self.decay
        result, _ = quad(lambda x: self.value(t, x), lower, t, epsabs=1e-10, limit=200)
        return result

    def mass_bound(self) -> float:
        """Upper bound on the integral of phi(t, .) valid for every t."""
        return 1.0 / self.rate_floor()


@dataclass(frozen=True)
class ModelConstants:
    """Declared constants the model promises to satisfy.

    baseline_floor / baseline_cap bound every node's rate for all times,
    weight_floor / weight_cap bound nonzero cross-excitation weights,
    self_gap is the minimum excess of each self-weight over every
    cross-weight in its row, log_slope_bound caps |f'(t)|/f(t) for baselines
    and kernel time-slices, kernel_mass_bound caps every kernel's integral,
    stability_slack keeps each row's total excitation mass at or below
    1 - stability_slack, and max_degree caps the number of nonzero
    cross-weights per row.
    """

    baseline_floor: float
    baseline_cap: float
    weight_floor: float
    weight_cap: float
    self_gap: float
    log_slope_bound: float
    kernel_mass_bound: float
    stability_slack: float
    max_degree: int

    def __post_init__(self) -> None:
        if self.baseline_floor <= 0:
            raise ValueError("baseline_floor must be positive")
        if not 0 < self.stability_slack < 1:
            raise ValueError("stability_slack must lie in (0, 1)")
        if self.max_degree < 0:
            raise ValueError("max_degree must be nonnegative")


@dataclass(frozen=True)
class HawkesModel:
    """Complete process specification for n nodes.

    weights maps (target, source) pairs to positive jump sizes; absent pairs
    are zero.  kernels applies to every pair unless kernel_overrides names a
    specific (target, source).  Treat instances as immutable.
    """

    n: int
    weights: Mapping[tuple[int, int], float]
    baselines: tuple[BaselineSpec, ...]
    default_kernel: KernelSpec
    constants: ModelConstants
    kernel_overrides: Mapping[tuple[int, int], KernelSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("model needs at least one node")
        if len(self.baselines) != self.n:
            raise ValueError("one baseline per node required")
        for (i, j), w in self.weights.items():
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"weight index ({i}, {j}) out of range")
            if w < 0:
                raise ValueError("weights must be nonnegative")
        for i, j in self.kernel_overrides:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"kernel override index ({i}, {j}) out of range")

    def weight(self, i: int, j: int) -> float:
        """Jump added to node i's intensity by an event of node j."""
        return self.weights.get((i, j), 0.0)

    def kernel(self, i: int, j: int) -> KernelSpec:
        return self.kernel_overrides.get((i, j), self.default_kernel)

    def baseline(self, i: int) -> BaselineSpec:
        return self.baselines[i]

    @cached_property
    def weight_matrix(self) -> np.ndarray:
        """Dense (n, n) array W with W[i, j] = weight(i, j). Read-only."""
        mat = np.zeros((self.n, self.n))
        for (i, j), w in self.weights.items():
            mat[i, j] = w
        mat.flags.writeable = False
        return mat

    @cached_property
    def distinct_kernels(self) -> tuple[KernelSpec, ...]:
        seen: dict[KernelSpec, None] = {self.default_kernel: None}
        for spec in self.kernel_overrides.values():
            seen[spec] = None
        return tuple(seen)

    def parents(self, i: int) -> tuple[int, ...]:
        """Sources with a nonzero weight into node i, diagonal included."""
        return tuple(j for j in range(self.n) if self.weight(i, j) > 0)

    def fingerprint(self) -> str:
        """Stable 12-hex-digit digest of all model parameters."""
        parts: list[str] = [f"n={self.n}"]
        for (i, j), w in sorted(self.weights.items()):
            parts.append(f"w[{i},{j}]={w!r}")
        for b in self.baselines:
            parts.append(f"b:{b.family},{b.level!r},{b.amplitude!r},{b.frequency!r},{b.phase!r}")
        for key, k in [(None, self.default_kernel)] + sorted(self.kernel_overrides.items()):
            parts.append(f"k{key}:{k.family},{k.decay!r},{k.decay_amplitude!r},{k.decay_frequency!r}")
        c = self.constants
        parts.append(
            f"c:{c.baseline_floor!r},{c.baseline_cap!r},{c.weight_floor!r},{c.weight_cap!r},"
            f"{c.self_gap!r},{c.log_slope_bound!r},{c.kernel_mass_bound!r},"
            f"{c.stability_slack!r},{c.max_degree}"
        )
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class DependencyGraph:
    """Undirected dependency structure over nodes 0..n-1.

    An edge {i, j} means at least one direction of excitation between i and j
    is nonzero.  Edges are stored as sorted (i, j) tuples with i < j.
    """

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i}, {j})")

    def has_edge(self, i: int, j: int) -> bool:
        a, b = min(i, j), max(i, j)
        return (a, b) in self.edges

    def neighbors(self, i: int) -> tuple[int, ...]:
        out = [b if a == i else a for a, b in self.edges if i in (a, b)]
        return tuple(sorted(out))

    def restrict(self, observed: Iterable[int]) -> "DependencyGraph":
        """Induced subgraph on the observed nodes, in the ambient index space."""
        kept = frozenset(observed)
        if not kept:
            raise ValueError("observed set must be nonempty")
        edges = frozenset(e for e in self.edges if e[0] in kept and e[1] in kept)
        return DependencyGraph(self.n, edges)

    @property
    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def true_graph(model: HawkesModel) -> DependencyGraph:
    """Dependency graph of the model: {i, j} iff w_ij > 0 or w_ji > 0."""
    edges = set()
    for (i, j), w in model.weights.items():
        if i != j and w > 0:
            edges.add((min(i, j), max(i, j)))
    return DependencyGraph(model.n, frozenset(edges))


@dataclass(frozen=True)
class AssumptionCheck:
    """Outcome of one model assumption check."""

    name: str
    passed: bool
    margin: float
    worst: str
    detail: str

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"{self.name:16s} {status}  margin={self.margin:+.4g}  worst at {self.worst}  ({self.detail})"


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        head = "model validation: " + ("PASS" if self.passed else "FAIL")
        return "\n".join([head] + ["  " + str(c) for c in self.checks])


def _check_baseline_floor(model: HawkesModel, grid: np.ndarray) -> AssumptionCheck:
    floor = model.constants.baseline_floor
    worst_val, worst_where = math.inf, ""
    for i, spec in enumerate(model.baselines):
        vals = spec.value(grid)
        k = int(np.argmin(vals))
        if vals[k] < worst_val:
            worst_val, worst_where = float(vals[k]), f"node {i}, t={grid[k]:.4g}"
        analytic = spec.floor()
        if analytic < worst_val:
            worst_val, worst_where = analytic, f"node {i}, analytic floor"
    margin = worst_val - floor
    return AssumptionCheck(
        "baseline-floor", margin >= 0, margin, worst_where,
        f"min rate {worst_val:.6g} vs declared floor {floor:.6g}",
    )


def _check_kernel_shape(model: HawkesModel, grid: np.ndarray) -> AssumptionCheck:
    # phi(s, s) = 1 and phi nonincreasing in t, checked per distinct kernel
    # on event times sampled from the grid.
    worst_dev, worst_where = 0.0, "none"
    sample = grid[:: max(1, len(grid) // 64)]
    offsets = np.linspace(0.0, 5.0, 41)
    for spec in model.distinct_kernels:
        at_zero = spec.value(sample, sample)
        k = int(np.argmax(np.abs(at_zero - 1.0)))
        dev = float(abs(at_zero[k] - 1.0))
        if dev > worst_dev:
            worst_dev, worst_where = dev, f"phi(s,s) at s={sample[k]:.4g}"
        for s in sample[:: max(1, len(sample) // 8)]:
            vals = spec.value(s + offsets, s)
            rises = np.diff(vals)
            m = int(np.argmax(rises))
            if rises[m] > worst_dev:
                worst_dev, worst_where = float(rises[m]), f"increase after s={s:.4g}"
            if np.any(vals < 0):
                worst_dev, worst_where = max(worst_dev, float(-vals.min())), f"negative value, s={s:.4g}"
    margin = 1e-9 - worst_dev
    return AssumptionCheck(
        "kernel-shape", worst_dev <= 1e-9, margin, worst_where,
        "unit value at the event time and nonincreasing afterwards",
    )


def _stability_row_sums(model: HawkesModel, t: float) -> np.ndarray:
    sums = np.zeros(model.n)
    cache: dict[tuple[KernelSpec, float], float] = {}
    for (i, j), w in model.weights.items():
        spec = model.kernel(i, j)
        key = (spec, t)
        if key not in cache:
            cache[key] = spec.integral(t)
        sums[i] += w * cache[key]
    return sums


def _check_stability(model: HawkesModel, grid: np.ndarray) -> AssumptionCheck:
    limit = 1.0 - model.constants.stability_slack
    # Exponential-family integrals grow with t, so the horizon end dominates.
    # Modulated kernels get a subsampled scan since each point costs a
    # quadrature call.
    if all(k.family == "exponential" for k in model.distinct_kernels):
        probe = np.array([grid[-1]])
    else:
        probe = grid[:: max(1, len(grid) // 48)]
        if probe[-1] != grid[-1]:
            probe = np.append(probe, grid[-1])
    worst_sum, worst_where = -math.inf, ""
    for t in probe:
        sums = _stability_row_sums(model, float(t))
        i = int(np.argmax(sums))
        if sums[i] > worst_sum:
            worst_sum, worst_where = float(sums[i]), f"row {i}, t={t:.4g}"
    mass_ok = True
    for spec in model.distinct_kernels:
        if spec.mass_bound() > model.constants.kernel_mass_bound + 1e-12:
            mass_ok = False
            worst_where = f"kernel mass bound {spec.mass_bound():.4g}"
    margin = limit - worst_sum
    return AssumptionCheck(
        "stability", margin >= 0 and mass_ok, margin, worst_where,
        f"max row excitation mass {worst_sum:.6g} vs limit {limit:.6g}",
    )


def _check_smoothness(model: HawkesModel, grid: np.ndarray) -> AssumptionCheck:
    # Central finite differences with step 1e-5; the declared bound must
    # exceed the empirical estimate by at least 1 percent.
    bound = model.constants.log_slope_bound
    h = 1e-5
    worst_est, worst_where = 0.0, "none"
    inner = grid[grid >= h]
    for i, spec in enumerate(model.baselines):
        est = np.abs(spec.value(inner + h) - spec.value(inner - h)) / (2 * h * spec.value(inner))
        k = int(np.argmax(est))
        if est[k] > worst_est:
            worst_est, worst_where = float(est[k]), f"baseline {i}, t={inner[k]:.4g}"
    sample = grid[:: max(1, len(grid) // 32)]
    offsets = np.linspace(h, 3.0, 25)
    for spec in model.distinct_kernels:
        for s in sample[:: max(1, len(sample) // 8)]:
            t = s + offsets
            est = np.abs(spec.value(t + h, s) - spec.value(t - h, s)) / (2 * h * spec.value(t, s))
            k = int(np.argmax(est))
            if est[k] > worst_est:
                worst_est, worst_where = float(est[k]), f"kernel slice s={s:.4g}, t={t[k]:.4g}"
    margin = bound - 1.01 * worst_est
    return AssumptionCheck(
        "smoothness", margin >= 0, margin, worst_where,
        f"declared bound {bound:.6g} vs 1.01 * estimate {1.01 * worst_est:.6g}",
    )


def _check_weight_bounds(model: HawkesModel) -> AssumptionCheck:
    c = model.constants
    worst_margin, worst_where = math.inf, "none"

    def note(margin: float, where: str) -> None:
        nonlocal worst_margin, worst_where
        if margin < worst_margin:
            worst_margin, worst_where = margin, where

    for i in range(model.n):
        w_self = model.weight(i, i)
        note(w_self, f"self-weight ({i},{i})" if w_self <= 0 else f"self-weight ({i},{i}) positivity")
        for j in range(model.n):
            if j == i:
                continue
            w = model.weight(i, j)
            if w > 0:
                note(w - c.weight_floor, f"({i},{j}) below weight floor")
                note(c.weight_cap - w, f"({i},{j}) above weight cap")
            note(w_self - w - c.self_gap, f"self gap at ({i},{j})")
    if model.n == 1:
        note(model.weight(0, 0), "single-node self-weight")
    return AssumptionCheck(
        "weight-bounds", worst_margin >= 0, worst_margin, worst_where,
        "nonzero cross-weights inside [floor, cap], self-weights dominate by the gap",
    )


def _check_sparsity(model: HawkesModel) -> AssumptionCheck:
    cap = model.constants.max_degree
    counts = np.zeros(model.n, dtype=int)
    for (i, j), w in model.weights.items():
        if i != j and w > 0:
            counts[i] += 1
    i = int(np.argmax(counts)) if model.n else 0
    margin = float(cap - counts[i])
    return AssumptionCheck(
        "sparsity", margin >= 0, margin, f"row {i} with {counts[i]} cross-weights",
        f"per-row nonzero cross-weights vs max degree {cap}",
    )


def validate_model(model: HawkesModel, horizon: float, grid_step: float = 0.05) -> ValidationReport:
    """Check every model assumption on a time grid over [0, horizon].

    Violations are reported, not raised; callers decide what a failed check
    means for them.  The grid has step ``grid_step`` and always includes the
    horizon endpoint.
    """
    if horizon <= 0 or grid_step <= 0:
        raise ValueError("horizon and grid_step must be positive")
    grid = np.arange(0.0, horizon + grid_step / 2, grid_step)
    if grid[-1] < horizon:
        grid = np.append(grid, horizon)
    checks = (
        _check_baseline_floor(model, grid),
        _check_kernel_shape(model, grid),
        _check_stability(model, grid),
        _check_smoothness(model, grid),
        _check_weight_bounds(model),
        _check_sparsity(model),
    )
    return ValidationReport(checks)


# ---------------------------------------------------------------------------
# Model files.  A model is stored as a single YAML document with sections
# "nodes", "constants", "baselines", "default_kernel", optional
# "kernel_overrides", and "weights" (a list of [target, source, weight]
# triples).  Field names below are stable.

def _baseline_to_dict(spec: BaselineSpec) -> dict:
    out = {"family": spec.family, "level": spec.level}
    if spec.family == "sinusoidal":
        out.update(amplitude=spec.amplitude, frequency=spec.frequency, phase=spec.phase)
    return out


def _baseline_from_dict(raw: Mapping) -> BaselineSpec:
    return BaselineSpec(
        family=raw["family"],
        level=float(raw["level"]),
        amplitude=float(raw.get("amplitude", 0.0)),
        frequency=float(raw.get("frequency", 0.0)),
        phase=float(raw.get("phase", 0.0)),
    )


def _kernel_to_dict(spec: KernelSpec) -> dict:
    out = {"family": spec.family, "decay": spec.decay}
    if spec.family == "modulated":
        out.update(decay_amplitude=spec.decay_amplitude, decay_frequency=spec.decay_frequency)
    return out


def _kernel_from_dict(raw: Mapping) -> KernelSpec:
    return KernelSpec(
        family=raw["family"],
        decay=float(raw["decay"]),
        decay_amplitude=float(raw.get("decay_amplitude", 0.0)),
        decay_frequency=float(raw.get("decay_frequency", 0.0)),
    )


def save_model(model: HawkesModel, path: str) -> None:
    doc = {
        "nodes": model.n,
        "constants": {
            "baseline_floor": model.constants.baseline_floor,
            "baseline_cap": model.constants.baseline_cap,
            "weight_floor": model.constants.weight_floor,
            "weight_cap": model.constants.weight_cap,
            "self_gap": model.constants.self_gap,
            "log_slope_bound": model.constants.log_slope_bound,
            "kernel_mass_bound": model.constants.kernel_mass_bound,
            "stability_slack": model.constants.stability_slack,
            "max_degree": model.constants.max_degree,
        },
        "baselines": [_baseline_to_dict(b) for b in model.baselines],
        "default_kernel": _kernel_to_dict(model.default_kernel),
        "weights": [[i, j, w] for (i, j), w in sorted(model.weights.items())],
    }
    if model.kernel_overrides:
        doc["kernel_overrides"] = [
            dict(target=i, source=j, **_kernel_to_dict(k))
            for (i, j), k in sorted(model.kernel_overrides.items())
        ]
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_model(path: str) -> HawkesModel:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    n = int(doc["nodes"])
    raw_c = doc["constants"]
    constants = ModelConstants(
        baseline_floor=float(raw_c["baseline_floor"]),
        baseline_cap=float(raw_c["baseline_cap"]),
        weight_floor=float(raw_c["weight_floor"]),
        weight_cap=float(raw_c["weight_cap"]),
        self_gap=float(raw_c["self_gap"]),
        log_slope_bound=float(raw_c["log_slope_bound"]),
        kernel_mass_bound=float(raw_c["kernel_mass_bound"]),
        stability_slack=float(raw_c["stability_slack"]),
        max_degree=int(raw_c["max_degree"]),
    )
    raw_b = doc["baselines"]
    if isinstance(raw_b, Mapping):
        baselines = tuple(_baseline_from_dict(raw_b) for _ in range(n))
    else:
        baselines = tuple(_baseline_from_dict(b) for b in raw_b)
    overrides = {
        (int(o["target"]), int(o["source"])): _kernel_from_dict(o)
        for o in doc.get("kernel_overrides", [])
    }
    weights = {(int(i), int(j)): float(w) for i, j, w in doc["weights"]}
    return HawkesModel(
        n=n,
        weights=weights,
        baselines=baselines,
        default_kernel=_kernel_from_dict(doc["default_kernel"]),
        constants=constants,
        kernel_overrides=overrides,
    )
