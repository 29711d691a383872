"""Pilot-trained gain control and affine least-squares equalization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateDataError, SingularTrainingError


@dataclass(frozen=True)
class Equalizer:
    """Affine map w -> matrix @ w + bias, trained to minimize pilot residuals."""

    matrix: np.ndarray = field(repr=False)  # (N, N)
    bias: np.ndarray = field(repr=False)  # (N,)
    training_mse: float


def agc(symbol_vectors: np.ndarray, pilot_truth: np.ndarray, n_pilot: int):
    """Scale all symbol vectors by the pilot-derived scalar gain.

    The gain g = sum(|a_k|^2) / sum(<w_k, a_k>) over the pilot span aligns the
    received pilots with the true amplitude vectors a_k in the least-squares
    sense. Returns (scaled_vectors, gain).
    """
    w = np.asarray(symbol_vectors, dtype=np.float64)
    a = np.asarray(pilot_truth, dtype=np.float64)[:n_pilot]
    wp = w[:n_pilot]
    truth_energy = float(np.sum(a * a))
    cross = float(np.sum(wp * a))
    if truth_energy == 0.0:
        raise DegenerateDataError("pilot truth amplitudes are all zero; AGC gain undefined")
    if cross == 0.0:
        raise DegenerateDataError("pilot cross-correlation is zero; AGC gain degenerate")
    gain = truth_energy / cross
    return gain * w, gain


def train_mmse(
    pilot_vectors: np.ndarray, pilot_truth: np.ndarray, ridge: float | None = None
) -> Equalizer:
    """Fit the affine equalizer minimizing sum |A w_k + b - a_k|^2 + ridge * |A|_F^2.

    Solved by normal equations on bias-augmented vectors; the ridge penalizes
    the matrix only. ridge=None picks 1e-6 * trace(W^T W) / N; an exactly
    rank-deficient pilot set with ridge=0 raises SingularTrainingError.
    """
    w = np.asarray(pilot_vectors, dtype=np.float64)
    a = np.asarray(pilot_truth, dtype=np.float64)
    if w.ndim != 2 or a.shape != w.shape:
        raise ConfigError(f"pilot shapes mismatch: {w.shape} vs {a.shape}")
    n_pilot, n_dim = w.shape
    if n_pilot < n_dim + 1:
        raise DegenerateDataError(f"equalizer training needs >= {n_dim + 1} pilots, got {n_pilot}")

    normal_w = w.T @ w
    if ridge is None:
        ridge = 1e-6 * float(np.trace(normal_w)) / n_dim
    if ridge < 0:
        raise ConfigError(f"ridge must be >= 0, got {ridge}")

    x = np.hstack([w, np.ones((n_pilot, 1))])  # (n_pilot, N+1)
    gram = x.T @ x
    gram[:n_dim, :n_dim] += ridge * np.eye(n_dim)
    rhs = x.T @ a
    eigvals = np.linalg.eigvalsh(gram)
    if eigvals[0] <= max(eigvals[-1], 1.0) * 1e-12:
        raise SingularTrainingError(
            "pilot normal matrix is singular; train with a nonzero ridge or more diverse pilots"
        )
    theta = np.linalg.solve(gram, rhs)  # (N+1, N), column j solves output dim j
    matrix = theta[:n_dim].T
    bias = theta[n_dim]
    residual = w @ matrix.T + bias - a
    training_mse = float(np.mean(np.sum(residual * residual, axis=1)))
    return Equalizer(matrix=matrix, bias=bias, training_mse=training_mse)


def apply_equalizer(eq: Equalizer, symbol_vectors: np.ndarray) -> np.ndarray:
    """Apply w -> A w + b to each symbol vector."""
    w = np.asarray(symbol_vectors, dtype=np.float64)
    if w.shape[-1] != eq.matrix.shape[1]:
        raise ConfigError(f"vector dimension {w.shape[-1]} != equalizer dimension {eq.matrix.shape[1]}")
    return w @ eq.matrix.T + eq.bias
