"""Exponentially weighted monitoring of a complex-valued velocity stream.

The monitored signal is generally improper: its pseudo-covariance
``E[(v - mu)(v - mu)^T]`` does not vanish, because conjugate eigenvalue pairs
tie the signal to its own conjugate.  The chart therefore works with the
augmented vector ``(v, conj(v))`` whose second-order description needs both
the Hermitian covariance and the pseudo-covariance.  The squared Mahalanobis
statistic of the augmented smoothed vector is evaluated through its Schur
block decomposition, which halves the inversion size and is algebraically
identical to inverting the full augmented covariance.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericsError

__all__ = ["beta", "ComplexMewma"]

# Relative part of the diagonal loading.  Conjugate-pair constraints make the
# augmented covariance generically singular, so every inversion is loaded with
# ridge + RIDGE_SCALE * mean diagonal of the covariance estimate.
RIDGE_SCALE = 1e-6
COND_SENTINEL = 1e12


def beta(alpha: float, n: int) -> float:
    """Finite-sample variance factor of the smoothed vector after n steps.

    Converges to alpha / (2 - alpha) as n grows; the finite-sample form keeps
    the statistic calibrated during the first steps after a (re)start.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return alpha * (1.0 - (1.0 - alpha) ** (2 * n)) / (2.0 - alpha)


def _inv2(m: np.ndarray) -> np.ndarray:
    # Adjugate inverse of a complex 2x2, much cheaper than a LAPACK call.
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if det == 0.0:
        raise NumericsError("singular 2x2 matrix")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def _inv(m: np.ndarray) -> np.ndarray:
    if m.shape[0] == 2:
        return _inv2(m)
    try:
        return np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"covariance inversion failed: {exc}") from exc


class ComplexMewma:
    """Augmented EWMA chart for complex vectors.

    Attributes:
        rank: dimension r of the monitored vectors.
        alpha: smoothing rate in (0, 1).
        z: smoothed vector.
        mu: running mean estimate.
        sigma: running Hermitian covariance estimate.
        sigma_tilde: running pseudo-covariance estimate.
        count: vectors consumed since the last (re)start.
        ridge: absolute floor of the diagonal loading.
        moment_decay: optional forgetting factor for the moment estimates;
            None (the default) keeps cumulative equal-weight estimates.
    """

    def __init__(
        self,
        rank: int,
        alpha: float,
        ridge: float = 1e-8,
        moment_decay: float | None = None,
    ):
        if not isinstance(rank, (int, np.integer)) or rank < 1:
            raise ValueError(f"rank must be a positive integer, got {rank!r}")
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
        if not ridge > 0.0:
            raise ValueError(f"ridge must be positive, got {ridge!r}")
        if moment_decay is not None and not 0.0 < moment_decay < 1.0:
            raise ValueError(f"moment_decay must lie in (0, 1), got {moment_decay!r}")
        self.rank = int(rank)
        self.alpha = float(alpha)
        self.ridge = float(ridge)
        self.moment_decay = moment_decay
        self.z = np.zeros(self.rank, dtype=np.complex128)
        self.mu = np.zeros(self.rank, dtype=np.complex128)
        self.sigma = np.zeros((self.rank, self.rank), dtype=np.complex128)
        self.sigma_tilde = np.zeros((self.rank, self.rank), dtype=np.complex128)
        self.count = 0

    def reset(self) -> "ComplexMewma":
        """Zero all running state; parameters are preserved."""
        self.z[:] = 0.0
        self.mu[:] = 0.0
        self.sigma[:] = 0.0
        self.sigma_tilde[:] = 0.0
        self.count = 0
        return self

    def ingest(self, v) -> "ComplexMewma":
        """Consume one velocity vector, updating the smoothed vector and moments."""
        v = np.asarray(v, dtype=np.complex128)
        if v.shape != (self.rank,):
            raise ValueError(f"expected a vector of length {self.rank}, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("non-finite velocity rejected; state unchanged")
        self.count += 1
        n = self.count
        delta = v - self.mu
        if self.moment_decay is None:
            self.mu += delta / n
            w = (n - 1.0) / (n * n)
            self.sigma *= (n - 1.0) / n
            self.sigma += w * np.outer(delta, delta.conj())
            self.sigma_tilde *= (n - 1.0) / n
            self.sigma_tilde += w * np.outer(delta, delta)
        else:
            g = 1.0 - self.moment_decay
            self.mu += g * delta
            w = g * (1.0 - g)
            self.sigma *= 1.0 - g
            self.sigma += w * np.outer(delta, delta.conj())
            self.sigma_tilde *= 1.0 - g
            self.sigma_tilde += w * np.outer(delta, delta)
        # keep the estimates exactly Hermitian / symmetric
        self.sigma = 0.5 * (self.sigma + self.sigma.conj().T)
        self.sigma_tilde = 0.5 * (self.sigma_tilde + self.sigma_tilde.T)
        self.z = (1.0 - self.alpha) * self.z + self.alpha * v
        return self

    @property
    def effective_ridge(self) -> float:
        """Diagonal loading applied at the next statistic evaluation."""
        return self.ridge + RIDGE_SCALE * float(np.trace(self.sigma).real) / self.rank

    def statistic(self) -> float:
        """Squared Mahalanobis distance of the augmented smoothed vector.

        Real and non-negative for every reachable state.  Raises
        :class:`NumericsError` when the loaded covariance is still too ill
        conditioned to invert, which signals that the burn-in is too short.
        """
        if self.count < 1:
            raise ValueError("statistic undefined before the first velocity")
        delta_load = self.effective_ridge
        eye = np.eye(self.rank)
        s_conj = self.sigma.conj() + delta_load * eye
        s_conj_inv = _inv(s_conj)
        schur = (
            self.sigma
            + delta_load * eye
            - self.sigma_tilde @ s_conj_inv @ self.sigma_tilde.conj()
        )
        schur_inv = _inv(schur)
        cond = float(
            np.abs(schur).sum(axis=0).max() * np.abs(schur_inv).sum(axis=0).max()
        )
        if not cond < COND_SENTINEL:
            raise NumericsError(
                "covariance too ill-conditioned despite ridge loading; "
                "extend the burn-in before evaluating the statistic"
            )
        coupling = -schur_inv @ self.sigma_tilde @ s_conj_inv
        dev = self.z - self.mu
        b = beta(self.alpha, self.count)
        raw = (dev.conj() @ schur_inv @ dev + dev.conj() @ coupling @ dev.conj()).real
        value = (2.0 / b) * float(raw)
        if value < 0.0:
            if value <= -1e-9:
                raise NumericsError(f"statistic came out negative ({value!r})")
            value = 0.0
        return value
