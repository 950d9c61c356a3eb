"""Zeros of the orthonormal polynomials via comrade-matrix eigenvalues.

Q_n vanishes exactly at the eigenvalues of the n-by-n truncation of the
multiplication-by-z Hessenberg matrix.  This never touches monomial
coefficients, whose conversion is hopeless past moderate degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .orthopoly import OrthoSequence

__all__ = [
    "ZeroSet",
    "EigenFailure",
    "comrade_matrix",
    "zeros_of",
    "zero_counting_measure",
]

# Entries below this fraction of the matrix scale are quadrature/summation
# noise.  Zeroing them restores the exact sparsity pattern, which lets the
# balancing permutation deflate structural eigenvalues (a disk's multiple
# zero at the center would otherwise smear into a ring of radius ~eps^(1/n)).
CLEAN_RTOL = 1e-12
BOUNDARY_BAND_RTOL = 1e-8
CLUSTER_RTOL = 1e-9


class EigenFailure(RuntimeError):
    """The QR eigenvalue iteration did not converge for this degree."""


@dataclass
class ZeroSet:
    """Zeros of Q_n with multiplicity, sorted by (Re, Im).

    ``flags[i]`` classifies ``zeros[i]`` against the domain closure with a
    boundary band of 1e-8 times the diameter.  ``backward_error`` is the
    worst eigenpair residual of the uncleaned comrade matrix, relative to
    its spectral norm.
    """

    n: int
    zeros: np.ndarray
    flags: tuple[str, ...]
    backward_error: float
    diameter: float

    def clustered(self, rtol: float = CLUSTER_RTOL) -> list[tuple[complex, int]]:
        """Zeros merged within rtol*diameter, as (representative, count).

        Reporting convenience only; multiplicity is never detected
        algebraically and the counting measure keeps exact coordinates.
        """
        tol = rtol * self.diameter
        sites: list[tuple[complex, int]] = []
        for z in self.zeros:
            for i, (rep, cnt) in enumerate(sites):
                if abs(z - rep) <= tol:
                    sites[i] = (rep, cnt + 1)
                    break
            else:
                sites.append((complex(z), 1))
        return sites


def comrade_matrix(seq: OrthoSequence, n: int) -> np.ndarray:
    """n-by-n truncated multiplication matrix with noise entries zeroed.

    A matrix that is real up to noise is returned real: the real QR
    iteration then produces exactly conjugate-paired eigenvalues, which
    keeps the zero sets of axis-symmetric domains closed under conjugation
    even inside multiple-zero clusters.
    """
    if not 1 <= n <= seq.N:
        raise ValueError(f"need 1 <= n <= {seq.N}, got {n}")
    h = seq.hessenberg[:n, :n]
    scale = np.linalg.norm(h, ord="fro") / max(np.sqrt(n), 1.0)
    clean = np.where(np.abs(h) < CLEAN_RTOL * scale, 0.0, h)
    if np.max(np.abs(clean.imag)) < CLEAN_RTOL * scale:
        return clean.real.copy()
    return clean


def zeros_of(seq: OrthoSequence, n: int) -> ZeroSet:
    """Zero set of Q_n as comrade-matrix eigenvalues (QR with balancing)."""
    comrade = comrade_matrix(seq, n)
    try:
        w, vr = sla.eig(comrade, right=True)
    except sla.LinAlgError as exc:
        raise EigenFailure(f"eigenvalue iteration failed at degree {n}") from exc

    raw = seq.hessenberg[:n, :n]
    residuals = np.linalg.norm(raw @ vr - vr * w[None, :], axis=0)
    scale = np.linalg.norm(raw, 2)
    # a centered domain gives the exactly-zero 1x1 matrix at n=1
    backward_error = float(np.max(residuals) / scale) if scale > 0 else 0.0

    order = np.lexsort((w.imag, w.real))
    zeros = w[order]
    domain = seq.domain
    band = BOUNDARY_BAND_RTOL * domain.diameter
    flags = tuple(domain.contains(complex(z), boundary_tol=band) for z in zeros)
    return ZeroSet(
        n=n,
        zeros=zeros,
        flags=flags,
        backward_error=backward_error,
        diameter=domain.diameter,
    )


def zero_counting_measure(zs: ZeroSet) -> dict[complex, float]:
    """Discrete measure with mass 1/n per listed zero; exact-coordinate
    duplicates merge (their masses add), total mass 1."""
    if zs.n < 1:
        raise ValueError("empty zero set")
    counts: dict[complex, int] = {}
    for z in zs.zeros:
        key = complex(z)
        counts[key] = counts.get(key, 0) + 1
    return {z: c / zs.n for z, c in counts.items()}
