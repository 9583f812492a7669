"""Radial basis function network mapping the rhythm signal to joint references.

Hidden unit i responds with a Gaussian bump around a stored 4-vector of
rhythm samples; the linear readout produces the 12 joint reference angles
(abd, hip, knee per leg, legs ordered LF, RF, LH, RH).  Hidden means are
pinned to the rhythm signal sampled at H uniform times across one period,
so only the readout (W, b) is ever fitted.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cpg import CpgConfig, NUM_LEGS, rhythm_at

NUM_JOINTS = 12

DEFAULT_HIDDEN = 20
DEFAULT_VARIANCE = 0.04


class FitError(RuntimeError):
    """Readout fit could not reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class RbfnParams:
    means: np.ndarray      # (H, 4) rhythm samples
    sigma_sq: float        # shared Gaussian variance
    weights: np.ndarray    # (H, 12) readout weights
    bias: np.ndarray       # (12,) readout bias

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if means.ndim != 2 or means.shape[0] < 2 or means.shape[1] != NUM_LEGS:
            raise ValueError("means must be (H>=2, 4)")
        if not (self.sigma_sq > 0.0 and np.isfinite(self.sigma_sq)):
            raise ValueError(f"sigma_sq must be positive, got {self.sigma_sq}")
        h = means.shape[0]
        if np.asarray(self.weights).shape != (h, NUM_JOINTS):
            raise ValueError("weights must be (H, 12)")
        if np.asarray(self.bias).shape != (NUM_JOINTS,):
            raise ValueError("bias must be (12,)")
        for arr in (means, self.weights, self.bias):
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameters must be finite")

    @property
    def hidden_count(self) -> int:
        return self.means.shape[0]


def compute_means(cfg: CpgConfig, hidden: int = DEFAULT_HIDDEN) -> np.ndarray:
    """Hidden means: the rhythm signal sampled at times (i-1)*T/(H-1), i=1..H."""
    if hidden < 2:
        raise ValueError(f"need at least 2 hidden units, got {hidden}")
    means = np.empty((hidden, NUM_LEGS))
    for i in range(hidden):
        means[i] = rhythm_at(cfg, i * cfg.period / (hidden - 1))
    return means


def initial_params(cfg: CpgConfig, hidden: int = DEFAULT_HIDDEN,
                   sigma_sq: float = DEFAULT_VARIANCE) -> RbfnParams:
    """Zero-readout parameters with means pinned to the given oscillator."""
    return RbfnParams(
        means=compute_means(cfg, hidden),
        sigma_sq=sigma_sq,
        weights=np.zeros((hidden, NUM_JOINTS)),
        bias=np.zeros(NUM_JOINTS),
    )


def hidden_activations(rho: np.ndarray, params: RbfnParams) -> np.ndarray:
    """Gaussian bump response of every hidden unit, each in (0, 1]."""
    rho = np.asarray(rho, dtype=float)
    diff = rho - params.means
    return np.exp(-np.sum(diff * diff, axis=-1) / params.sigma_sq)


def forward(rho: np.ndarray, params: RbfnParams) -> np.ndarray:
    """Joint reference angles for one rhythm sample: W' R + b, shape (12,)."""
    return hidden_activations(rho, params) @ params.weights + params.bias


def fit(targets: list[tuple[np.ndarray, np.ndarray]], delta: float,
        params: RbfnParams, max_solves: int = 100) -> RbfnParams:
    """Refit the readout so every target is matched within delta (max-abs, rad).

    targets are (rhythm sample, 12 joint angles) pairs.  The readout is a
    linear layer, so the fit is a ridge-regularized least-squares solve on
    the hidden-activation design matrix, verified against delta and retried
    with weaker regularization while it fails.  Means and variance are
    never touched.  Raises FitError with the best residual achieved when
    the verification never passes.
    """
    if not targets:
        raise ValueError("need at least one target")
    if not (delta > 0.0):
        raise ValueError(f"delta must be positive, got {delta}")

    rhos = np.asarray([np.asarray(r, dtype=float) for r, _ in targets])
    ys = np.asarray([np.asarray(y, dtype=float) for _, y in targets])
    if rhos.shape[1] != NUM_LEGS or ys.shape[1] != NUM_JOINTS:
        raise ValueError("targets must pair 4-dim rhythm samples with 12 joint angles")

    design = np.exp(-np.sum((rhos[:, None, :] - params.means[None, :, :]) ** 2, axis=2)
                    / params.sigma_sq)                       # (n, H)
    n, h = design.shape
    aug = np.hstack([design, np.ones((n, 1))])               # solve W and b jointly

    best_residual = np.inf
    best = None
    ridge = 1e-8
    for _ in range(max_solves):
        # augmented rows keep the solve stable for arbitrarily small ridge
        lhs = np.vstack([aug, np.sqrt(ridge) * np.eye(h + 1)])
        rhs = np.vstack([ys, np.zeros((h + 1, NUM_JOINTS))])
        sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
        weights, bias = sol[:h], sol[h]
        fitted = replace(params, weights=weights, bias=bias)
        residual = max(
            float(np.max(np.abs(forward(r, fitted) - y))) for r, y in zip(rhos, ys)
        )
        if residual < best_residual:
            best_residual = residual
            best = fitted
        if residual <= delta:
            return fitted
        ridge *= 0.1

    raise FitError(
        f"residual {best_residual:.3e} above threshold {delta:.3e} "
        f"after {max_solves} solves",
        residual=best_residual,
    )
