"""Synthetic first-order vector autoregressive benchmark streams.

Six named benchmark families are provided.  Four are bivariate rotation-form
processes that differ only in the noise distribution (gaussian, student_t,
laplace, huber); two are higher dimensional, one embedding a bivariate
rotation into a noisy ambient space (sparse) and one with dense full-rank
transitions built from a random real canonical form (fullrank).  Each family
comes in an ``arl1`` variant (length 400, one changepoint) and an ``arl0``
variant (length 10000, no change).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numba import njit
from scipy.special import ndtr

from .errors import NumericsError

__all__ = [
    "NoiseSpec",
    "VarModel",
    "Replication",
    "DATASETS",
    "ARL1_LENGTH",
    "ARL0_LENGTH",
    "STUDENT_BINS",
    "HUBER_BINS",
    "DIMENSION_BINS",
    "sample_unit_disk",
    "rotation_transition",
    "random_noise_covariance",
    "draw_noise",
    "stationary_covariance",
    "simulate",
    "make_bivariate_model",
    "make_sparse_highdim",
    "fullrank_transition_factors",
    "make_fullrank_highdim",
    "make_bivariate_dataset",
    "make_dataset",
    "disk_distance_threshold",
]

DATASETS = ("gaussian", "student_t", "laplace", "huber", "sparse", "fullrank")
ARL1_LENGTH = 400
ARL0_LENGTH = 10_000

STUDENT_BINS = (3, 4, 5, 6, 8, 10, 12, 15, 20, 30)
HUBER_BINS = (0.0, 0.01, 0.02, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40)
DIMENSION_BINS = (2, 4, 6, 10, 15, 20, 25, 30, 35, 40)

# Stability margin on the spectral radius of generated transitions.
_STABILITY_MARGIN = 1e-9
# Seed of the cached Monte Carlo estimate of the disk distance percentile.
_DISK_MC_SEED = 1729
_DISK_MC_SAMPLES = 10**6


def sample_unit_disk(rng) -> tuple[float, float]:
    """One point uniform on the closed unit disk, as (a, b) coordinates.

    Draws radius sqrt(u) with u ~ Uniform(0, 1) and an independent angle
    uniform on [0, 2*pi), in that order.
    """
    u = rng.uniform(0.0, 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    r = math.sqrt(u)
    return r * math.cos(phi), r * math.sin(phi)


def rotation_transition(a: float, b: float) -> np.ndarray:
    """Real 2x2 canonical form of multiplication by a + bi; eigenvalues a +- bi."""
    if not a * a + b * b < 1.0:
        raise ValueError(f"unstable pair ({a!r}, {b!r}): a**2 + b**2 must be < 1")
    return np.array([[a, -b], [b, a]])


def random_noise_covariance(dim: int, rng) -> np.ndarray:
    """Random covariance S^T S from Uniform(-1, 1) entries, loaded to be SPD."""
    s = rng.uniform(-1.0, 1.0, size=(dim, dim))
    return s.T @ s + 1e-9 * np.eye(dim)


@lru_cache(maxsize=1)
def disk_distance_threshold() -> float:
    """90th percentile of the distance between two uniform unit-disk points.

    Estimated once per process from a fixed-seed Monte Carlo run so every
    process reproduces the same threshold.
    """
    rng = np.random.default_rng(_DISK_MC_SEED)
    pts = []
    for _ in range(2):
        r = np.sqrt(rng.random(_DISK_MC_SAMPLES))
        phi = rng.uniform(0.0, 2.0 * math.pi, _DISK_MC_SAMPLES)
        pts.append(r * np.exp(1j * phi))
    return float(np.quantile(np.abs(pts[0] - pts[1]), 0.9))


@dataclass(frozen=True)
class NoiseSpec:
    """Noise distribution of a synthetic process.

    Kinds: ``gaussian`` (covariance required), ``laplace_copula`` (Gaussian
    copula with Laplace marginals matching the covariance diagonal),
    ``student_t`` (scale mixture, needs ``nu >= 3``), ``huber``
    (epsilon-contaminated standard Gaussian, identity base covariance) and
    ``custom`` (user sampler).
    """

    kind: str
    covariance: np.ndarray | None = None
    nu: int | None = None
    contamination: float | None = None
    sampler: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "laplace_copula", "student_t", "huber", "custom"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.covariance is not None:
            cov = np.asarray(self.covariance, dtype=np.float64)
            object.__setattr__(self, "covariance", cov)
            if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
                raise ValueError(f"covariance must be square, got shape {cov.shape}")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            if np.linalg.eigvalsh(cov).min() < -1e-9:
                raise ValueError("covariance must be positive semi-definite")
        if self.kind in ("gaussian", "laplace_copula", "student_t") and self.covariance is None:
            raise ValueError(f"{self.kind} noise requires a covariance")
        if self.kind == "student_t":
            if self.nu is None or self.nu < 3:
                raise ValueError(f"student_t noise requires nu >= 3, got {self.nu!r}")
        if self.kind == "huber":
            eps = self.contamination
            if eps is None or not 0.0 <= eps < 1.0:
                raise ValueError(f"huber noise requires contamination in [0, 1), got {eps!r}")
            if self.covariance is None:
                object.__setattr__(self, "covariance", np.eye(2))
        if self.kind == "custom" and (self.sampler is None or self.covariance is None):
            raise ValueError("custom noise requires both a sampler and its covariance")

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def moment_covariance(self) -> np.ndarray:
        """The actual second moment of one draw (not the base parameter)."""
        if self.kind == "student_t":
            return (self.nu / (self.nu - 2.0)) * self.covariance
        if self.kind == "huber":
            # mixture (1 - eps) N(0, I) + eps N(0, 9 I)
            return (1.0 + 8.0 * self.contamination) * self.covariance
        return self.covariance

    def sample(self, rng, size: int) -> np.ndarray:
        """Draw ``size`` noise vectors as a (size, dim) array."""
        d = self.dim
        if self.kind == "gaussian":
            chol = np.linalg.cholesky(self.covariance)
            return rng.standard_normal((size, d)) @ chol.T
        if self.kind == "laplace_copula":
            diag = np.diag(self.covariance)
            corr = self.covariance / np.sqrt(np.outer(diag, diag))
            chol = np.linalg.cholesky(corr)
            z = rng.standard_normal((size, d)) @ chol.T
            u = np.clip(ndtr(z), 1e-300, 1.0 - 1e-16)
            scale = np.sqrt(diag / 2.0)
            centred = u - 0.5
            return -scale * np.sign(centred) * np.log1p(-2.0 * np.abs(centred))
        if self.kind == "student_t":
            chol = np.linalg.cholesky(self.covariance)
            y = rng.standard_normal((size, d)) @ chol.T
            chi2 = rng.chisquare(self.nu, size)
            return y * np.sqrt(self.nu / chi2)[:, None]
        if self.kind == "huber":
            base = rng.standard_normal((size, d))
            outlier = rng.random(size) < self.contamination
            return base * np.where(outlier, 3.0, 1.0)[:, None]
        draws = np.asarray(self.sampler(rng, size), dtype=np.float64)
        if draws.shape != (size, d):
            raise ValueError(f"custom sampler returned shape {draws.shape}, expected {(size, d)}")
        return draws


def draw_noise(spec: NoiseSpec, rng) -> np.ndarray:
    """One noise vector from ``spec``."""
    return spec.sample(rng, 1)[0]


def _spectral_radius(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(m)).max())


@dataclass(frozen=True)
class VarModel:
    """A piecewise-constant linear process with at most one transition change.

    ``tau`` is the index of the first observation generated under ``theta1``
    (row 0 of a simulated stream is the stationary initial draw); None means
    no change and ``theta0`` throughout.
    """

    dim: int
    theta0: np.ndarray
    theta1: np.ndarray
    noise: NoiseSpec
    tau: int | None
    length: int

    def __post_init__(self):
        theta0 = np.asarray(self.theta0, dtype=np.float64)
        theta1 = np.asarray(self.theta1, dtype=np.float64)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "theta1", theta1)
        if theta0.shape != (self.dim, self.dim) or theta1.shape != (self.dim, self.dim):
            raise ValueError("transition matrices must be (dim, dim)")
        for name, m in (("theta0", theta0), ("theta1", theta1)):
            radius = _spectral_radius(m)
            if radius > 1.0 - _STABILITY_MARGIN:
                raise ValueError(f"{name} spectral radius {radius} is not < 1")
        if self.noise.dim != self.dim:
            raise ValueError("noise dimension does not match the model dimension")
        if self.length < 2:
            raise ValueError(f"length must be at least 2, got {self.length}")
        if self.tau is not None:
            lo = math.floor(0.3 * self.length)
            hi = math.floor(0.7 * self.length)
            if not lo <= self.tau <= hi:
                raise ValueError(f"tau {self.tau} outside [{lo}, {hi}] for T={self.length}")


def stationary_covariance(theta: np.ndarray, sigma: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Fixed point of gamma = theta gamma theta^T + sigma, by doubling iteration."""
    gamma = np.asarray(sigma, dtype=np.float64).copy()
    a = np.asarray(theta, dtype=np.float64).copy()
    for _ in range(200):
        increment = a @ gamma @ a.T
        gamma += increment
        if np.linalg.norm(increment) <= tol * max(1.0, np.linalg.norm(gamma)):
            return 0.5 * (gamma + gamma.T)
        a = a @ a
    raise NumericsError("stationary covariance iteration did not converge")


@njit(cache=True)
def _var_path(theta0, theta1, tau, noise, x0):
    # tau < 0 means no change; row 0 of the output is the initial state.
    n = noise.shape[0]
    out = np.empty_like(noise)
    out[0] = x0
    for t in range(1, n):
        if tau < 0 or t < tau:
            out[t] = theta0 @ out[t - 1] + noise[t]
        else:
            out[t] = theta1 @ out[t - 1] + noise[t]
    return out


def simulate(model: VarModel, rng) -> np.ndarray:
    """Generate one stream of shape (length, dim).

    The initial row is drawn from the stationary law of the pre-change
    segment (Gaussian with the fixed-point covariance), so no transient
    contaminates run-length estimates.  Draw order: initial state, then the
    noise block.
    """
    gamma = stationary_covariance(model.theta0, model.noise.moment_covariance())
    chol = np.linalg.cholesky(gamma + 1e-12 * np.eye(model.dim))
    x0 = chol @ rng.standard_normal(model.dim)
    noise = model.noise.sample(rng, model.length)
    tau = -1 if model.tau is None else int(model.tau)
    return _var_path(model.theta0, model.theta1, tau, noise, x0)


def _stable_disk_pair(rng) -> tuple[float, float]:
    while True:
        a, b = sample_unit_disk(rng)
        if a * a + b * b < (1.0 - _STABILITY_MARGIN) ** 2:
            return a, b


def _draw_tau(rng, length: int) -> int:
    lo = math.floor(0.3 * length)
    hi = math.floor(0.7 * length)
    return int(rng.integers(lo, hi + 1))


def make_bivariate_model(
    noise_kind: str,
    variant: str,
    rng,
    bin_value=None,
) -> VarModel:
    """One bivariate replication: fresh disk pairs, covariance and changepoint.

    ``bin_value`` is the degrees of freedom for student_t or the
    contamination level for huber.
    """
    if variant not in ("arl1", "arl0"):
        raise ValueError(f"variant must be 'arl1' or 'arl0', got {variant!r}")
    a0, b0 = _stable_disk_pair(rng)
    theta0 = rotation_transition(a0, b0)
    if variant == "arl1":
        a1, b1 = _stable_disk_pair(rng)
        theta1 = rotation_transition(a1, b1)
    else:
        theta1 = theta0
    if noise_kind == "gaussian":
        noise = NoiseSpec("gaussian", covariance=random_noise_covariance(2, rng))
    elif noise_kind == "laplace":
        noise = NoiseSpec("laplace_copula", covariance=random_noise_covariance(2, rng))
    elif noise_kind == "student_t":
        noise = NoiseSpec(
            "student_t", covariance=random_noise_covariance(2, rng), nu=int(bin_value)
        )
    elif noise_kind == "huber":
        noise = NoiseSpec("huber", contamination=float(bin_value))
    else:
        raise ValueError(f"unknown bivariate noise kind {noise_kind!r}")
    length = ARL1_LENGTH if variant == "arl1" else ARL0_LENGTH
    tau = _draw_tau(rng, length) if variant == "arl1" else None
    return VarModel(2, theta0, theta1, noise, tau, length)


def _embed_rotation(dim: int, i: int, j: int, a: float, b: float) -> np.ndarray:
    theta = np.zeros((dim, dim))
    theta[i, i] = a
    theta[j, j] = a
    theta[i, j] = -b
    theta[j, i] = b
    return theta


def make_sparse_highdim(dim: int, rng, variant: str = "arl1") -> VarModel:
    """Bivariate rotation embedded at two random coordinates of a noisy space.

    The pre- and post-change eigenvalues are redrawn until their distance
    clears the cached 90th-percentile threshold, so the embedded change is
    always material.
    """
    if dim < 2:
        raise ValueError(f"dim must be at least 2, got {dim}")
    if variant not in ("arl1", "arl0"):
        raise ValueError(f"variant must be 'arl1' or 'arl0', got {variant!r}")
    low = disk_distance_threshold()
    while True:
        a0, b0 = _stable_disk_pair(rng)
        a1, b1 = _stable_disk_pair(rng)
        if abs(complex(a1, b1) - complex(a0, b0)) >= low:
            break
    perm = rng.permutation(dim)
    i, j = int(perm[0]), int(perm[1])
    theta0 = _embed_rotation(dim, i, j, a0, b0)
    theta1 = _embed_rotation(dim, i, j, a1, b1) if variant == "arl1" else theta0
    noise = NoiseSpec("gaussian", covariance=random_noise_covariance(dim, rng))
    length = ARL1_LENGTH if variant == "arl1" else ARL0_LENGTH
    tau = _draw_tau(rng, length) if variant == "arl1" else None
    return VarModel(dim, theta0, theta1, noise, tau, length)


def fullrank_transition_factors(dim: int, rng, kappa_max: float = 15.0):
    """Draw the (canonical form, similarity) factors of a dense transition.

    The canonical block-diagonal holds a conjugate-closed random spectrum
    (real values and rotation blocks from the unit disk); the similarity is a
    Gaussian matrix whose singular values are clipped from below so its
    condition number never exceeds ``kappa_max``.
    """
    n_pairs = int(rng.integers(0, dim // 2 + 1))
    n_real = dim - 2 * n_pairs
    blocks = []
    for _ in range(n_real):
        a, _ = _stable_disk_pair(rng)
        blocks.append(np.array([[a]]))
    for _ in range(n_pairs):
        a, b = _stable_disk_pair(rng)
        blocks.append(rotation_transition(a, abs(b)))
    canonical = np.zeros((dim, dim))
    offset = 0
    for block in blocks:
        k = block.shape[0]
        canonical[offset : offset + k, offset : offset + k] = block
        offset += k
    g = rng.standard_normal((dim, dim))
    u, s, vt = np.linalg.svd(g)
    s_clipped = np.maximum(s, s[0] / kappa_max)
    similarity = u @ np.diag(s_clipped) @ vt
    return canonical, similarity


def _random_fullrank_transition(dim: int, rng) -> np.ndarray:
    canonical, similarity = fullrank_transition_factors(dim, rng)
    return similarity @ canonical @ np.linalg.inv(similarity)


def make_fullrank_highdim(dim: int, rng, variant: str = "arl1") -> VarModel:
    """Dense transitions with a random conjugate-closed spectrum."""
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    if variant not in ("arl1", "arl0"):
        raise ValueError(f"variant must be 'arl1' or 'arl0', got {variant!r}")
    theta0 = _random_fullrank_transition(dim, rng)
    theta1 = _random_fullrank_transition(dim, rng) if variant == "arl1" else theta0
    noise = NoiseSpec("gaussian", covariance=random_noise_covariance(dim, rng))
    length = ARL1_LENGTH if variant == "arl1" else ARL0_LENGTH
    tau = _draw_tau(rng, length) if variant == "arl1" else None
    return VarModel(dim, theta0, theta1, noise, tau, length)


@dataclass(frozen=True)
class Replication:
    """One generated stream along with its ground truth."""

    index: int
    stream: np.ndarray = field(repr=False)
    model: VarModel = field(repr=False)
    bin_value: object = None


def _bin_value(name: str, index: int, n_reps: int):
    if name == "student_t":
        return STUDENT_BINS[index * 10 // n_reps]
    if name == "huber":
        return HUBER_BINS[index * 10 // n_reps]
    if name in ("sparse", "fullrank"):
        return DIMENSION_BINS[index * 10 // n_reps]
    return None


def _make_model(name: str, variant: str, rng, bin_value) -> VarModel:
    if name in ("gaussian", "laplace", "student_t", "huber"):
        return make_bivariate_model(name, variant, rng, bin_value=bin_value)
    if name == "sparse":
        return make_sparse_highdim(int(bin_value), rng, variant)
    if name == "fullrank":
        return make_fullrank_highdim(int(bin_value), rng, variant)
    raise ValueError(f"unknown dataset {name!r}; choose one of {DATASETS}")


def make_dataset(name: str, n_reps: int, variant: str, seed: int) -> list[Replication]:
    """Generate ``n_reps`` replications of a named benchmark family.

    Binned families (student_t, huber, sparse, fullrank) spread replications
    across their 10 bins in index order.  Each replication uses its own RNG
    stream spawned from (seed, index), so any subset regenerates identically.
    """
    if name not in DATASETS:
        raise ValueError(f"unknown dataset {name!r}; choose one of {DATASETS}")
    if n_reps < 1:
        raise ValueError(f"n_reps must be positive, got {n_reps}")
    children = np.random.SeedSequence(seed).spawn(n_reps)
    out = []
    for i in range(n_reps):
        rng = np.random.default_rng(children[i])
        bin_value = _bin_value(name, i, n_reps)
        model = _make_model(name, variant, rng, bin_value)
        stream = simulate(model, rng)
        out.append(Replication(index=i, stream=stream, model=model, bin_value=bin_value))
    return out


def make_bivariate_dataset(
    noise_kind: str, n_reps: int, variant: str, seed: int
) -> list[tuple[np.ndarray, int | None]]:
    """Bivariate replications as (stream, changepoint or None) pairs."""
    reps = make_dataset(noise_kind, n_reps, variant, seed)
    return [(rep.stream, rep.model.tau) for rep in reps]
