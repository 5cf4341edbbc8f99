"""Online estimation of a linear transition operator by recursive least squares.

The estimator tracks ``theta``, the weighted least-squares solution of
``x_t ~ theta @ x_{t-1}`` over the stream consumed so far, where pairs are
downweighted geometrically by a forgetting factor ``rho``.  The recursion is
the standard exponentially weighted RLS in Sherman-Morrison form, which is
defined from the very first pair and agrees with the explicitly formed batch
solution regularised by ``epsilon * rho**n * I`` (anchored at the initial
operator).
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["DynamicsEstimator"]


@njit(cache=True)
def _rls_step(theta, p, x_prev, x_new, rho):
    # One rank-one update of theta and the (unnormalised) inverse Gram p.
    px = p @ x_prev
    denom = rho + x_prev @ px
    k = px / denom
    theta += np.outer(x_new - theta @ x_prev, k)
    p -= np.outer(k, px)
    p /= rho
    # Symmetrise: floating-point drift would otherwise accumulate over long
    # streams and break the symmetry invariant of the inverse Gram.
    d = p.shape[0]
    for i in range(d):
        for j in range(i):
            m = 0.5 * (p[i, j] + p[j, i])
            p[i, j] = m
            p[j, i] = m


@njit(cache=True)
def _rls_fold(theta, p, xs, rho):
    for t in range(1, xs.shape[0]):
        _rls_step(theta, p, xs[t - 1], xs[t], rho)


class DynamicsEstimator:
    """Recursive tracker of the transition operator of a vector stream.

    Attributes:
        dim: ambient dimension of the observations.
        theta: current (dim, dim) operator estimate.
        gamma_inv: inverse of the regularised regressor Gram matrix.
        rho: forgetting factor in (0, 1].
        step: number of consecutive (regressor, target) pairs consumed.
        prev_x: last observation, regressor for the next update (None before
            the first observation).
    """

    def __init__(self, dim: int, rho: float = 1.0, epsilon: float | None = None):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ValueError(f"dim must be a positive integer, got {dim!r}")
        if not 0.0 < rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {rho!r}")
        if epsilon is None:
            epsilon = 1e-6 * dim
        if not epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon!r}")
        self.dim = int(dim)
        self.rho = float(rho)
        self.epsilon = float(epsilon)
        self.theta = np.eye(self.dim)
        self.gamma_inv = np.eye(self.dim) / self.epsilon
        self.step = 0
        self.prev_x: np.ndarray | None = None

    @classmethod
    def warm_start(
        cls, batch, rho: float = 1.0, epsilon: float | None = None
    ) -> "DynamicsEstimator":
        """Build an estimator from an initial batch of observations.

        The result is bit-for-bit identical to constructing a fresh estimator
        and calling :meth:`update` on every batch element in order.
        """
        try:
            xs = np.asarray(batch, dtype=np.float64)
        except ValueError as exc:
            raise ValueError("batch vectors have inconsistent lengths") from exc
        if xs.ndim != 2:
            raise ValueError(f"batch must be a sequence of vectors, got shape {xs.shape}")
        dim = xs.shape[1]
        if xs.shape[0] < dim + 1:
            raise ValueError(
                f"warm start needs at least dim+1={dim + 1} observations, got {xs.shape[0]}"
            )
        est = cls(dim, rho=rho, epsilon=epsilon)
        est.extend(xs)
        return est

    def _validate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        if not np.isfinite(x).all():
            raise ValueError("non-finite observation rejected; state unchanged")
        return x

    def update(self, x_new) -> "DynamicsEstimator":
        """Consume one observation.

        The first observation is only stored as the regressor for the next
        call; every later call advances the estimate by one weighted
        least-squares step.  Non-finite input is rejected without touching
        the state.
        """
        x = self._validate(x_new)
        if self.prev_x is None:
            self.prev_x = x.copy()
            return self
        _rls_step(self.theta, self.gamma_inv, self.prev_x, x, self.rho)
        self.step += 1
        self.prev_x = x.copy()
        return self

    def extend(self, xs) -> "DynamicsEstimator":
        """Consume a whole block of observations (same result as repeated update)."""
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise ValueError(f"expected an (n, {self.dim}) array, got shape {xs.shape}")
        if not np.isfinite(xs).all():
            raise ValueError("non-finite observation rejected; state unchanged")
        if xs.shape[0] == 0:
            return self
        if self.prev_x is not None:
            _rls_step(self.theta, self.gamma_inv, self.prev_x, xs[0], self.rho)
            self.step += 1
        _rls_fold(self.theta, self.gamma_inv, xs, self.rho)
        self.step += xs.shape[0] - 1
        self.prev_x = xs[-1].copy()
        return self

    def effective_sample_size(self) -> float:
        """Return (1 - rho**n) / (1 - rho), the weight mass of the n pairs seen."""
        if self.step < 1:
            raise ValueError("effective sample size undefined before the first pair")
        if self.rho == 1.0:
            return float(self.step)
        return (1.0 - self.rho**self.step) / (1.0 - self.rho)
