"""Shapley attribution of flow predictions.

Region-level attribution assigns a Shapley value to every input feature
(channel, cell, history step) or feature group (channel, region, history
step) of the prediction target.  Trajectory-level attribution then splits
each cell's value equally among the trajectories indexed at that cell and
sums along each trajectory's path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, factorial
from typing import Callable, Sequence

import numpy as np

from .flow import Channel, CellTrajectoryIndex
from .predictor import Predictor, rollout

Feature = tuple[Channel, int, int, int]  # (channel c2, row i, col j, history step tau)


def feature_key(f: Feature) -> str:
    c, i, j, tau = f
    return f"{Channel(c).label}:{i}:{j}:{tau}"


def parse_feature_key(key: str) -> Feature:
    c, i, j, tau = key.split(":")
    return (Channel.from_label(c), int(i), int(j), int(tau))


@dataclass(frozen=True)
class TargetSpec:
    """What scalar the attribution explains: one predicted cell or the sum
    over one region's cells, on a channel, at a rollout horizon."""

    kind: str  # "cell" | "region"
    channel: Channel
    horizon: int = 1
    cell: tuple[int, int] | None = None
    region_id: int | None = None

    def __post_init__(self):
        if self.kind not in ("cell", "region"):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.kind == "cell" and self.cell is None:
            raise ValueError("cell target needs a cell")
        if self.kind == "region" and self.region_id is None:
            raise ValueError("region target needs a region_id")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass
class FeatureSpace:
    """Ordered features, partitioned into groups (super-features)."""

    features: list[Feature]
    groups: list[list[int]]        # indices into features
    group_keys: list[str]

    @property
    def p(self) -> int:
        return len(self.groups)

    def group_features(self, g: int) -> list[Feature]:
        return [self.features[i] for i in self.groups[g]]


def per_cell_feature_space(rows: int, cols: int, history_length: int) -> FeatureSpace:
    features = [(c, i, j, tau)
                for c in (Channel.IN, Channel.OUT)
                for i in range(rows)
                for j in range(cols)
                for tau in range(history_length)]
    groups = [[idx] for idx in range(len(features))]
    keys = [feature_key(f) for f in features]
    return FeatureSpace(features, groups, keys)


def per_region_feature_space(cell_region: np.ndarray, history_length: int) -> FeatureSpace:
    """One group per (channel, region, tau) over the member cells."""
    rows, cols = cell_region.shape
    features: list[Feature] = []
    groups: list[list[int]] = []
    keys: list[str] = []
    region_ids = sorted(int(r) for r in np.unique(cell_region))
    for c in (Channel.IN, Channel.OUT):
        for rid in region_ids:
            cells = np.argwhere(cell_region == rid)
            for tau in range(history_length):
                member_idx = []
                for i, j in cells:
                    member_idx.append(len(features))
                    features.append((c, int(i), int(j), tau))
                groups.append(member_idx)
                keys.append(f"{c.label}:r{rid}:{tau}")
    return FeatureSpace(features, groups, keys)


class ValueFunction:
    """val(S): predict on the input whose features in S take the explained
    window's values and whose absent features take background values."""

    def __init__(self, x: np.ndarray, background: np.ndarray,
                 predictor: Predictor, target: TargetSpec,
                 space: FeatureSpace, cell_region: np.ndarray | None = None):
        x = np.asarray(x, dtype=float)
        background = np.asarray(background, dtype=float)
        if x.shape != background.shape:
            raise ValueError("background dims must match the explained window")
        self.x = x
        self.background = background
        self.predictor = predictor
        self.target = target
        self.space = space
        self.cell_region = cell_region
        # per-feature index arrays into the (L, 2, M, N) window
        feats = space.features
        self._tau = np.array([f[3] for f in feats])
        self._c = np.array([int(f[0]) for f in feats])
        self._i = np.array([f[1] for f in feats])
        self._j = np.array([f[2] for f in feats])
        self._group_of = np.empty(len(feats), dtype=int)
        for g, members in enumerate(space.groups):
            self._group_of[members] = g
        if target.kind == "region":
            if cell_region is None:
                raise ValueError("region target needs a cell->region map")
            self._target_cells = np.argwhere(cell_region == target.region_id)
            if len(self._target_cells) == 0:
                raise ValueError(f"region {target.region_id} has no cells")

    def masked_window(self, group_mask: np.ndarray) -> np.ndarray:
        included = np.asarray(group_mask, dtype=bool)[self._group_of]
        window = self.background.copy()
        window[self._tau[included], self._c[included],
               self._i[included], self._j[included]] = \
            self.x[self._tau[included], self._c[included],
                   self._i[included], self._j[included]]
        return window

    def target_scalar(self, prediction: np.ndarray) -> float:
        t = self.target
        if t.kind == "cell":
            u, v = t.cell
            return float(prediction[int(t.channel), u, v])
        return float(sum(prediction[int(t.channel), i, j] for i, j in self._target_cells))

    def __call__(self, group_mask: np.ndarray) -> float:
        window = self.masked_window(group_mask)
        preds = rollout(self.predictor, window, self.target.horizon)
        return self.target_scalar(preds[-1])


@dataclass
class AttributionResult:
    group_keys: list[str]
    phi: np.ndarray
    base_value: float
    full_value: float
    estimator: dict
    group_features: list[list[Feature]] = field(default_factory=list)

    @property
    def efficiency_residual(self) -> float:
        return float(self.phi.sum() - (self.full_value - self.base_value))

    def as_dict(self) -> dict:
        return {
            "phi": {k: float(v) for k, v in zip(self.group_keys, self.phi)},
            "base_value": self.base_value,
            "full_value": self.full_value,
            "estimator": self.estimator,
            "efficiency_residual": self.efficiency_residual,
        }


MAX_EXACT_FEATURES = 20


def shapley_exact(value_fn: Callable[[np.ndarray], float], p: int) -> AttributionResult:
    """Shapley values by full coalition enumeration (2^p evaluations)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if p > MAX_EXACT_FEATURES:
        raise ValueError(
            f"p={p} exceeds the enumeration limit {MAX_EXACT_FEATURES}; "
            "use shapley_sampled instead")
    n = 1 << p
    vals = np.empty(n)
    mask = np.zeros(p, dtype=bool)
    for s in range(n):
        for j in range(p):
            mask[j] = (s >> j) & 1
        vals[s] = value_fn(mask)

    sizes = np.array([int(s).bit_count() for s in range(n)])
    weights = np.array([factorial(s) * factorial(p - 1 - s) / factorial(p)
                        for s in range(p)])
    phi = np.zeros(p)
    all_sets = np.arange(n)
    for j in range(p):
        without = all_sets[(all_sets >> j) & 1 == 0]
        w = weights[sizes[without]]
        phi[j] = np.sum(w * (vals[without | (1 << j)] - vals[without]))

    return AttributionResult(
        group_keys=[str(j) for j in range(p)],
        phi=phi,
        base_value=float(vals[0]),
        full_value=float(vals[n - 1]),
        estimator={"kind": "exact"},
    )


def _kernel_rows(p: int, budget: int, rng: np.random.Generator
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Coalition rows (budget x p bool) and regression weights.

    Sizes whose subsets all fit in the remaining budget are enumerated
    completely with exact Shapley-kernel weights; leftover budget is spent
    on paired random complements over the remaining sizes, sharing the
    leftover kernel mass equally."""
    size_mass = {s: (p - 1) / (s * (p - s)) for s in range(1, p)}
    rows: list[np.ndarray] = []
    weights: list[float] = []
    remaining = budget
    leftover_sizes: list[int] = []

    for s in range(1, p // 2 + 1):
        pair = [s] if 2 * s == p else [s, p - s]
        count = sum(comb(p, q) for q in pair)
        if count <= remaining:
            for q in pair:
                w = size_mass[q] / comb(p, q)
                for subset in itertools.combinations(range(p), q):
                    row = np.zeros(p, dtype=bool)
                    row[list(subset)] = True
                    rows.append(row)
                    weights.append(w)
            remaining -= count
            for q in pair:
                del size_mass[q]
        else:
            leftover_sizes.extend(pair)

    if leftover_sizes and remaining >= 2:
        masses = np.array([size_mass[s] for s in leftover_sizes], dtype=float)
        probs = masses / masses.sum()
        n_pairs = remaining // 2
        drawn = rng.choice(len(leftover_sizes), size=n_pairs, p=probs)
        w_each = masses.sum() / (2 * n_pairs)
        for idx in drawn:
            s = leftover_sizes[idx]
            subset = rng.choice(p, size=s, replace=False)
            row = np.zeros(p, dtype=bool)
            row[subset] = True
            rows.append(row)
            weights.append(w_each)
            rows.append(~row)
            weights.append(w_each)

    return np.array(rows), np.array(weights)


def shapley_sampled(value_fn: Callable[[np.ndarray], float], p: int,
                    nsamples: int, seed: int) -> AttributionResult:
    """Kernel-weighted least-squares Shapley estimate with the efficiency
    constraint enforced exactly.  Deterministic for a given seed."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if nsamples < 2 * p + 2:
        raise ValueError(f"nsamples must be >= 2p+2 = {2 * p + 2}")

    f_empty = value_fn(np.zeros(p, dtype=bool))
    f_full = value_fn(np.ones(p, dtype=bool))
    delta = f_full - f_empty

    if p == 1:
        phi = np.array([delta])
        return AttributionResult([str(0)], phi, float(f_empty), float(f_full),
                                 {"kind": "sampled", "nsamples": nsamples, "seed": seed})

    last_error = None
    for attempt in range(4):
        rng = np.random.default_rng([seed, attempt])
        Z, w = _kernel_rows(p, nsamples - 2, rng)
        y = np.array([value_fn(z) for z in Z])

        # eliminate phi_p via the efficiency constraint
        zf = Z.astype(float)
        A = zf[:, :-1] - zf[:, -1:]
        b = y - f_empty - zf[:, -1] * delta
        sw = np.sqrt(w)
        sol, _, rank, _ = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)
        if rank < p - 1:
            last_error = RuntimeError(
                f"degenerate coalition sample matrix (rank {rank} < {p - 1})")
            continue
        phi = np.append(sol, delta - sol.sum())
        return AttributionResult(
            group_keys=[str(j) for j in range(p)],
            phi=phi,
            base_value=float(f_empty),
            full_value=float(f_full),
            estimator={"kind": "sampled", "nsamples": nsamples, "seed": seed,
                       "attempt": attempt},
        )
    raise last_error


def region_shap(x: np.ndarray, background: np.ndarray, predictor: Predictor,
                target: TargetSpec, grouping: str = "cell",
                cell_region: np.ndarray | None = None,
                nsamples: int = 4096, seed: int = 7,
                estimator: str = "auto") -> AttributionResult:
    """Shapley attribution of the target over input cells or regions.

    grouping "cell" uses one feature per (channel, cell, tau); grouping
    "region" groups member cells per (channel, region, tau) and needs the
    cell->region map.  Enumeration is used when the group count permits,
    otherwise the sampled estimator.
    """
    x = np.asarray(x, dtype=float)
    L, _, M, N = x.shape
    if grouping == "cell":
        space = per_cell_feature_space(M, N, L)
    elif grouping == "region":
        if cell_region is None:
            raise ValueError("per-region grouping needs a cell->region map")
        space = per_region_feature_space(np.asarray(cell_region), L)
    else:
        raise ValueError(f"unknown grouping {grouping!r}")

    value_fn = ValueFunction(x, background, predictor, target, space, cell_region)
    p = space.p
    if estimator == "auto":
        estimator = "exact" if p <= MAX_EXACT_FEATURES else "sampled"
    if estimator == "exact":
        result = shapley_exact(value_fn, p)
    elif estimator == "sampled":
        result = shapley_sampled(value_fn, p, nsamples, seed)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")

    result.group_keys = list(space.group_keys)
    result.group_features = [space.group_features(g) for g in range(p)]
    result.estimator["grouping"] = grouping
    return result


@dataclass
class TrajectoryScore:
    """One trajectory's attribution, with per-cell and per-step breakdown."""

    trajectory_id: str
    history_length: int
    shares: dict[Feature, float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.shares.values()))

    def channel_total(self, channel: Channel) -> float:
        return float(sum(v for (c, _, _, _), v in self.shares.items() if c == channel))

    def per_tau(self) -> np.ndarray:
        out = np.zeros(self.history_length)
        for (_, _, _, tau), v in self.shares.items():
            out[tau] += v
        return out

    def as_dict(self) -> dict:
        return {
            "trajectory_id": self.trajectory_id,
            "total": self.total,
            "total_in": self.channel_total(Channel.IN),
            "total_out": self.channel_total(Channel.OUT),
            "per_tau": [float(v) for v in self.per_tau()],
            "shares": {feature_key(f): float(v) for f, v in sorted(
                self.shares.items(), key=lambda kv: feature_key(kv[0]))},
        }


@dataclass
class TrajectoryShapResult:
    scores: list[TrajectoryScore]
    residual: float  # attribution on cells with no indexed trajectories


def trajectory_shap(result: AttributionResult, index: CellTrajectoryIndex,
                    window_slices: Sequence[int],
                    mode: str = "equal") -> TrajectoryShapResult:
    """Decompose per-cell attribution onto trajectories.

    Default mode splits each cell's value equally among the trajectories
    indexed at that (channel, cell, slice); "proportional" splits by each
    trajectory's transition count instead.  Value on cells with no indexed
    trajectory accumulates into the residual.
    """
    if mode not in ("equal", "proportional"):
        raise ValueError(f"unknown split mode {mode!r}")
    if not result.group_features or any(len(g) != 1 for g in result.group_features):
        raise ValueError("trajectory attribution needs a per-cell (singleton) grouping")

    L = len(window_slices)
    scores: dict[str, TrajectoryScore] = {}
    residual = 0.0
    for g, phi in enumerate(result.phi):
        (c, i, j, tau) = result.group_features[g][0]
        members = index.get((c, i, j, window_slices[tau]), [])
        if not members:
            residual += float(phi)
            continue
        if mode == "equal":
            split = [(tid, float(phi) / len(members)) for tid, _ in members]
        else:
            total_count = sum(cnt for _, cnt in members)
            split = [(tid, float(phi) * cnt / total_count) for tid, cnt in members]
        for tid, share in split:
            score = scores.setdefault(tid, TrajectoryScore(tid, L))
            key = (c, i, j, tau)
            score.shares[key] = score.shares.get(key, 0.0) + share

    ordered = sorted(scores.values(), key=lambda s: s.trajectory_id)
    return TrajectoryShapResult(ordered, residual)


def top_k(scores: list[TrajectoryScore], k: int) -> list[TrajectoryScore]:
    """Rank by absolute total, descending; ties by trajectory id ascending."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(scores, key=lambda s: (-abs(s.total), s.trajectory_id))
    return ranked[:k]


def time_channel_aggregate(score: TrajectoryScore) -> np.ndarray:
    return score.per_tau()
