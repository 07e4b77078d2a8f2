"""Black-box prediction contract and trainable baseline predictors.

A predictor maps a history window of L flow tensors, shape (L, 2, M, N)
with tau=0 the oldest slice, to the next tensor (2, M, N).  Fitted
predictors are immutable and predict() is deterministic, which the
attribution layer relies on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

DEFAULT_HISTORY_LENGTH = 5


class Predictor(Protocol):
    def predict(self, window: np.ndarray) -> np.ndarray: ...


def as_window(tensors: list[np.ndarray]) -> np.ndarray:
    """Stack flow tensors (oldest first) into a float history window."""
    if not tensors:
        raise ValueError("empty history")
    return np.stack([np.asarray(t, dtype=float) for t in tensors], axis=0)


@dataclass(frozen=True)
class HistoricalAveragePredictor:
    """Elementwise mean of the history window."""

    def predict(self, window: np.ndarray) -> np.ndarray:
        return np.asarray(window, dtype=float).mean(axis=0)


def _neighborhood_features(window: np.ndarray, radius: int) -> np.ndarray:
    """Per-cell feature stack, shape (F, M, N) with
    F = L * 2 * (2r+1)^2, ordered (tau, channel, dy, dx).
    Out-of-grid neighbors are zero-padded."""
    L, C, M, N = window.shape
    r = radius
    padded = np.pad(window, ((0, 0), (0, 0), (r, r), (r, r)))
    feats = []
    for tau in range(L):
        for c in range(C):
            for dy in range(2 * r + 1):
                for dx in range(2 * r + 1):
                    feats.append(padded[tau, c, dy:dy + M, dx:dx + N])
    return np.stack(feats, axis=0)


@dataclass(frozen=True)
class LinearPredictor:
    """Per-output-cell ridge regression over a spatial neighborhood of the
    history window."""

    coefs: np.ndarray      # (2, M, N, F) feature weights
    intercepts: np.ndarray  # (2, M, N)
    radius: int
    history_length: int

    def predict(self, window: np.ndarray) -> np.ndarray:
        window = np.asarray(window, dtype=float)
        if window.shape[0] != self.history_length:
            raise ValueError(
                f"expected history length {self.history_length}, got {window.shape[0]}")
        feats = _neighborhood_features(window, self.radius)
        return np.einsum("fmn,cmnf->cmn", feats, self.coefs) + self.intercepts


def fit_linear(dataset: list[tuple[np.ndarray, np.ndarray]],
               ridge_lambda: float = 0.1,
               window_radius: int = 1,
               intercept: bool = True) -> LinearPredictor:
    """Fit per-cell least-squares coefficients with an (unpenalized)
    intercept; ridge_lambda=0 falls back to minimum-norm least squares."""
    if not dataset:
        raise ValueError("empty training dataset")
    if len(dataset) < 2:
        raise ValueError("need at least 2 training pairs")
    L, C, M, N = dataset[0][0].shape
    r = window_radius

    feats_all = np.stack([_neighborhood_features(np.asarray(w, dtype=float), r)
                          for w, _ in dataset], axis=0)  # (n, F, M, N)
    targets = np.stack([np.asarray(y, dtype=float) for _, y in dataset], axis=0)  # (n, 2, M, N)
    n, F = feats_all.shape[0], feats_all.shape[1]

    coefs = np.zeros((2, M, N, F))
    intercepts = np.zeros((2, M, N))
    for c in range(2):
        for m in range(M):
            for col in range(N):
                X = feats_all[:, :, m, col]
                y = targets[:, c, m, col]
                if intercept:
                    X = np.hstack([X, np.ones((n, 1))])
                if ridge_lambda > 0:
                    penalty = ridge_lambda * np.eye(X.shape[1])
                    if intercept:
                        penalty[-1, -1] = 0.0
                    beta = np.linalg.solve(X.T @ X + penalty, X.T @ y)
                else:
                    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
                if intercept:
                    coefs[c, m, col] = beta[:-1]
                    intercepts[c, m, col] = beta[-1]
                else:
                    coefs[c, m, col] = beta
    return LinearPredictor(coefs, intercepts, r, L)


def rollout(predictor: Predictor, window: np.ndarray, steps: int) -> list[np.ndarray]:
    """Recursive multi-horizon prediction: each output re-enters the window
    in place of the oldest slice."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    window = np.asarray(window, dtype=float)
    out = []
    for _ in range(steps):
        y = predictor.predict(window)
        out.append(y)
        window = np.concatenate([window[1:], y[None]], axis=0)
    return out


def training_pairs(flow_tensors: list[np.ndarray],
                   history_length: int = DEFAULT_HISTORY_LENGTH
                   ) -> list[tuple[np.ndarray, np.ndarray]]:
    """Sliding (window, next-tensor) pairs from consecutive slices."""
    L = history_length
    pairs = []
    for i in range(len(flow_tensors) - L):
        pairs.append((as_window(flow_tensors[i:i + L]),
                      np.asarray(flow_tensors[i + L], dtype=float)))
    return pairs


def mean_background(flow_tensors: list[np.ndarray],
                    history_length: int = DEFAULT_HISTORY_LENGTH) -> np.ndarray:
    """Default masking reference: the elementwise mean history window over
    all sliding windows of the given range."""
    windows = [as_window(flow_tensors[i:i + history_length])
               for i in range(len(flow_tensors) - history_length + 1)]
    if not windows:
        raise ValueError("not enough slices for one history window")
    return np.mean(windows, axis=0)


def save_predictor(predictor, path: Path | str) -> None:
    """Parameters as little-endian float64 with JSON metadata."""
    path = Path(path)
    if isinstance(predictor, HistoricalAveragePredictor):
        path.with_suffix(".json").write_text(json.dumps({"model": "havg"}, sort_keys=True))
        path.write_bytes(b"")
        return
    if not isinstance(predictor, LinearPredictor):
        raise TypeError(f"cannot serialize {type(predictor).__name__}")
    blob = (np.ascontiguousarray(predictor.coefs, dtype="<f8").tobytes()
            + np.ascontiguousarray(predictor.intercepts, dtype="<f8").tobytes())
    path.write_bytes(blob)
    meta = {
        "model": "linear",
        "radius": predictor.radius,
        "history_length": predictor.history_length,
        "coef_shape": list(predictor.coefs.shape),
    }
    path.with_suffix(".json").write_text(json.dumps(meta, sort_keys=True))


def load_predictor(path: Path | str):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta["model"] == "havg":
        return HistoricalAveragePredictor()
    shape = tuple(meta["coef_shape"])
    n_coef = int(np.prod(shape))
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    coefs = raw[:n_coef].reshape(shape)
    intercepts = raw[n_coef:].reshape(shape[:3])
    return LinearPredictor(coefs.copy(), intercepts.copy(),
                           meta["radius"], meta["history_length"])
