"""Truncated operator spectra and continuity-preserving eigenvalue alignment.

Eigendecompositions return eigenvalues in no canonical order, so consecutive
spectra of a slowly varying operator can appear to jump, most visibly when a
complex conjugate pair swaps places.  Alignment reorders each new spectrum by
solving a linear assignment problem that minimises the total squared
displacement from the previous spectrum, which coincides with the optimal
transport coupling between the two spectra.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import NumericsError

__all__ = [
    "AlignedSpectrum",
    "Permutation",
    "dominant_eigenvalues",
    "alignment_cost",
    "solve_assignment",
    "align",
]


@dataclass(frozen=True)
class Permutation:
    """A bijection on {0, ..., r-1}, stored as ``mapping[i] = image of i``."""

    mapping: np.ndarray

    def __post_init__(self):
        mapping = np.asarray(self.mapping, dtype=np.intp)
        object.__setattr__(self, "mapping", mapping)
        r = mapping.shape[0]
        if mapping.ndim != 1 or r == 0:
            raise ValueError(f"mapping must be a non-empty 1-d array, got shape {mapping.shape}")
        seen = np.zeros(r, dtype=bool)
        for j in mapping:
            if j < 0 or j >= r or seen[j]:
                raise ValueError(f"mapping {mapping.tolist()} is not a permutation")
            seen[j] = True


@dataclass(frozen=True)
class AlignedSpectrum:
    """The r dominant eigenvalues, in a stable alignment-consistent order."""

    rank: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        object.__setattr__(self, "values", values)
        if values.shape != (self.rank,) or self.rank < 1:
            raise ValueError(f"expected {self.rank} eigenvalues, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("spectrum contains non-finite eigenvalues")

    @classmethod
    def cold_start(cls, values) -> "AlignedSpectrum":
        """First spectrum of a stream: sorted by the canonical dominance order.

        There is no previous spectrum to align against, so the convention is
        descending magnitude, ties broken by descending real part, then
        descending imaginary part.
        """
        values = np.asarray(values, dtype=np.complex128)
        return cls(values.shape[0], _sort_dominant(values))


def _sort_dominant(values: np.ndarray) -> np.ndarray:
    # lexsort uses the last key as the primary one
    order = np.lexsort((-values.imag, -values.real, -np.abs(values)))
    return values[order]


def _eigvals2(theta: np.ndarray) -> np.ndarray:
    # Closed-form spectrum of a 2x2 matrix; avoids LAPACK overhead on the
    # hot path of low-dimensional streams.
    half_tr = 0.5 * (theta[0, 0] + theta[1, 1])
    det = theta[0, 0] * theta[1, 1] - theta[0, 1] * theta[1, 0]
    root = cmath.sqrt(complex(half_tr * half_tr - det))
    return np.array([half_tr + root, half_tr - root])


def dominant_eigenvalues(theta, rank: int) -> np.ndarray:
    """Return the ``rank`` largest-modulus eigenvalues of ``theta``.

    The result is sorted by (|lambda| desc, Re desc, Im desc), which makes
    truncation ties at the cutoff deterministic.  Eigensolver failures raise
    :class:`NumericsError` so the caller can decide whether to keep the
    previous spectrum.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ValueError(f"theta must be square, got shape {theta.shape}")
    d = theta.shape[0]
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}], got {rank}")
    if not np.isfinite(theta).all():
        raise ValueError("theta contains non-finite entries")
    if d == 1:
        return theta[0, 0].astype(np.complex128).reshape(1)
    if d == 2:
        vals = _eigvals2(theta)
    else:
        try:
            vals = np.linalg.eigvals(theta)
        except np.linalg.LinAlgError as exc:
            raise NumericsError(f"eigendecomposition failed: {exc}") from exc
    if not np.isfinite(vals).all():
        raise NumericsError("eigendecomposition produced non-finite eigenvalues")
    return _sort_dominant(vals)[:rank]


def alignment_cost(prev, nxt) -> np.ndarray:
    """Squared-modulus assignment costs: ``cost[i, j] = |prev[i] - nxt[j]|**2``."""
    prev = np.asarray(prev, dtype=np.complex128)
    nxt = np.asarray(nxt, dtype=np.complex128)
    if prev.shape != nxt.shape or prev.ndim != 1:
        raise ValueError(f"length mismatch: {prev.shape} vs {nxt.shape}")
    diff = prev[:, None] - nxt[None, :]
    return np.abs(diff) ** 2


def _objective(cost: np.ndarray, rows, cols) -> float:
    # fsum is the correctly rounded sum, so comparisons between candidate
    # assignments do not depend on summation order.
    return math.fsum(float(cost[i, j]) for i, j in zip(rows, cols))


def solve_assignment(cost) -> Permutation:
    """Minimise ``sum_i cost[i, mapping[i]]`` over permutations.

    Among multiple optima the lexicographically smallest mapping is returned,
    so repeated runs and platforms agree on tied instances.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1] or cost.shape[0] == 0:
        raise ValueError(f"cost must be a square matrix, got shape {cost.shape}")
    if not np.isfinite(cost).all():
        raise ValueError("cost contains non-finite entries")
    r = cost.shape[0]
    if r == 1:
        return Permutation(np.zeros(1, dtype=np.intp))
    if r == 2:
        straight = cost[0, 0] + cost[1, 1]
        crossed = cost[0, 1] + cost[1, 0]
        if straight <= crossed:
            return Permutation(np.array([0, 1], dtype=np.intp))
        return Permutation(np.array([1, 0], dtype=np.intp))

    _, cols = linear_sum_assignment(cost)
    best = _objective(cost, range(r), cols)

    # Rebuild the lexicographically smallest optimal mapping row by row.  The
    # certificate is an optimal completion of the still-free rows; a column is
    # only accepted once some completion through it achieves the optimum.
    certificate = {i: int(cols[i]) for i in range(r)}
    free = list(range(r))
    fixed_cost: list[float] = []
    out = np.empty(r, dtype=np.intp)
    for i in range(r):
        chosen = -1
        for j in free:
            if j == certificate[i]:
                chosen = j
                break
            sub_rows = list(range(i + 1, r))
            sub_cols = [c for c in free if c != j]
            sub = cost[np.ix_(sub_rows, sub_cols)]
            rr, cc = linear_sum_assignment(sub)
            total = math.fsum(
                fixed_cost
                + [float(cost[i, j])]
                + [float(sub[a, b]) for a, b in zip(rr, cc)]
            )
            if total == best:
                chosen = j
                certificate[i] = j
                for a, b in zip(rr, cc):
                    certificate[sub_rows[a]] = sub_cols[b]
                break
        if chosen < 0:
            raise NumericsError("assignment refinement failed to reproduce the optimum")
        out[i] = chosen
        fixed_cost.append(float(cost[i, chosen]))
        free.remove(chosen)
    return Permutation(out)


def align(prev: AlignedSpectrum, raw_next) -> AlignedSpectrum:
    """Reorder ``raw_next`` so entry i is the eigenvalue matched to ``prev`` entry i.

    The returned order minimises the total squared displacement from the
    previous spectrum over all reorderings.
    """
    nxt = np.asarray(raw_next, dtype=np.complex128)
    if nxt.shape != (prev.rank,):
        raise ValueError(f"rank mismatch: expected {prev.rank}, got shape {nxt.shape}")
    if prev.rank == 1:
        return AlignedSpectrum(1, nxt.copy())
    if prev.rank == 2:
        d00 = abs(prev.values[0] - nxt[0]) ** 2 + abs(prev.values[1] - nxt[1]) ** 2
        d01 = abs(prev.values[0] - nxt[1]) ** 2 + abs(prev.values[1] - nxt[0]) ** 2
        if d00 <= d01:
            return AlignedSpectrum(2, nxt.copy())
        return AlignedSpectrum(2, nxt[::-1].copy())
    perm = solve_assignment(alignment_cost(prev.values, nxt))
    return AlignedSpectrum(prev.rank, nxt[perm.mapping])
