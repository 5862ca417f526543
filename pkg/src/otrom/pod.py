"""Proper orthogonal decomposition of snapshot matrices.

Small problems go through an eigendecomposition of the smaller Gram matrix
(method of snapshots); large ones fall back to a thin SVD.  Rank selection
is either explicit or by cumulative squared-singular-value energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, ShapeMismatch, ZeroNorm

__all__ = ["PODBasis", "compute_pod", "project", "reconstruct", "projection_error"]

_GRAM_MAX_SIDE = 512
# The Gram route squares the spectrum, so directions below sqrt(eps) of the
# top singular value are numerically unresolvable there.
_GRAM_RANK_FLOOR = 1e-7
_SVD_RANK_FLOOR = 1e-13


@dataclass(frozen=True)
class PODBasis:
    """Column-orthonormal modes with the retained singular spectrum."""

    modes: np.ndarray
    singular_values: np.ndarray
    energy_threshold: float | None

    @property
    def n_modes(self) -> int:
        return self.modes.shape[1]

    def energies(self) -> np.ndarray:
        """Cumulative energy fractions E(k) of the retained spectrum."""
        sq = self.singular_values ** 2
        total = sq.sum()
        if total == 0:
            return np.ones_like(sq)
        return np.cumsum(sq) / total


def _spectrum_via_gram(S: np.ndarray):
    n_h, n_t = S.shape
    if n_t <= n_h:
        lam, V = np.linalg.eigh(S.T @ S)
        lam = lam[::-1]
        V = V[:, ::-1]
        lam = np.maximum(lam, 0.0)
        sigma = np.sqrt(lam)
        keep = sigma > (sigma[0] * _GRAM_RANK_FLOOR if sigma.size else 0.0)
        sigma = sigma[keep]
        U = (S @ V[:, keep]) / sigma
    else:
        lam, U = np.linalg.eigh(S @ S.T)
        lam = np.maximum(lam[::-1], 0.0)
        U = U[:, ::-1]
        sigma = np.sqrt(lam)
        keep = sigma > (sigma[0] * _GRAM_RANK_FLOOR if sigma.size else 0.0)
        sigma = sigma[keep]
        U = U[:, keep]
    return U, sigma


def compute_pod(S: np.ndarray, threshold: float | None = None,
                rank: int | None = None) -> PODBasis:
    """Leading left singular vectors of a snapshot matrix.

    Exactly one of threshold (energy fraction in (0, 1], equality counts as
    reached) or rank selects the mode count.  A numerically zero matrix
    yields an empty basis.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.size == 0:
        raise EmptyMatrix(f"snapshot matrix with shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("snapshot matrix contains non-finite entries")
    if (threshold is None) == (rank is None):
        raise ValueError("select modes by exactly one of threshold or rank")
    if threshold is not None and not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    if rank is not None and rank < 0:
        raise ValueError("rank must be >= 0")

    if min(S.shape) <= _GRAM_MAX_SIDE:
        U, sigma = _spectrum_via_gram(S)
    else:  # pragma: no cover - beyond desk scale
        U, sigma, _ = np.linalg.svd(S, full_matrices=False)
        keep = sigma > sigma[0] * _SVD_RANK_FLOOR if sigma.size else []
        U, sigma = U[:, keep], sigma[keep]

    if sigma.size == 0:
        return PODBasis(modes=np.zeros((S.shape[0], 0)),
                        singular_values=sigma, energy_threshold=threshold)

    if rank is not None:
        n_r = min(rank, sigma.size)
    else:
        energy = np.cumsum(sigma ** 2) / (sigma ** 2).sum()
        n_r = int(np.searchsorted(energy, threshold - 1e-14) + 1)
        n_r = min(n_r, sigma.size)
    return PODBasis(modes=U[:, :n_r], singular_values=sigma,
                    energy_threshold=threshold)


def _vec(u) -> np.ndarray:
    values = getattr(u, "values", u)
    return np.asarray(values, dtype=np.float64)


def project(basis: PODBasis, u) -> np.ndarray:
    """Reduced coefficients U_r^T u."""
    v = _vec(u)
    if v.shape[0] != basis.modes.shape[0]:
        raise ShapeMismatch(f"vector of size {v.shape[0]} vs modes "
                            f"{basis.modes.shape}")
    return basis.modes.T @ v


def reconstruct(basis: PODBasis, coeffs) -> np.ndarray:
    """Full-order vector U_r coeffs."""
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape[0] != basis.n_modes:
        raise ShapeMismatch(f"{c.shape[0]} coefficients vs {basis.n_modes} modes")
    return basis.modes @ c


def projection_error(u, basis: PODBasis) -> float:
    """Relative L2 distance of u from the span of the basis."""
    v = _vec(u)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ZeroNorm("projection error undefined for a zero vector")
    residual = v - basis.modes @ (basis.modes.T @ v)
    return float(np.linalg.norm(residual) / norm)
