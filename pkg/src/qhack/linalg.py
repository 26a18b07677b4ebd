"""Dense complex-matrix kernel.

Composite indices are row-major everywhere: the pair ``(i, j)`` of a
``d1 x d2`` bipartition maps to ``i * d2 + j``, so ``<ij|X|kl>`` is
``X[i * d2 + j, k * d2 + l]``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

Partition = tuple[int, int]


class PartitionError(ValueError):
    """A bipartition does not match the shape of the matrix it annotates."""


class FactorizationError(RuntimeError):
    """A spectral factorization failed to converge."""


class SvdFactors(NamedTuple):
    left: np.ndarray  # W, orthonormal columns
    singulars: np.ndarray  # non-increasing, >= 0
    right_adj: np.ndarray  # V^dagger, orthonormal rows

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singulars) @ self.right_adj


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _check_partition(part: Partition, dim: int, what: str) -> tuple[int, int]:
    d1, d2 = (int(d) for d in part)
    if d1 < 1 or d2 < 1 or d1 * d2 != dim:
        raise PartitionError(f"{what}: partition {d1}x{d2} does not match dimension {dim}")
    return d1, d2


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def kron(a, b) -> np.ndarray:
    """Tensor product; row ``(i, j)`` of the result is ``i * rows(b) + j``."""
    return np.kron(_as_matrix(a), _as_matrix(b))


def partial_trace(m, part: Partition, keep: str = "first") -> np.ndarray:
    """Trace out one factor of a square bipartite operator.

    Parameters
    ----------
    m : array_like, shape (d1*d2, d1*d2)
    part : (d1, d2)
    keep : {"first", "second"}
        Which factor survives.
    """
    m = _as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise PartitionError(f"partial trace needs a square matrix, got {m.shape}")
    d1, d2 = _check_partition(part, m.shape[0], "partial_trace")
    t = m.reshape(d1, d2, d1, d2)
    if keep == "first":
        return np.einsum("ijkj->ik", t)
    if keep == "second":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 'first' or 'second', not {keep!r}")


def rotate_clockwise(u, row_part: Partition, col_part: Partition) -> np.ndarray:
    """Rotate the four tensor legs of ``u`` clockwise by one position.

    For ``u`` mapping ``A (x) B -> K (x) L`` (``row_part = (dK, dL)``,
    ``col_part = (dA, dB)``) the result satisfies
    ``uo[(i, j), (k, l)] = u[(k, i), (l, j)]`` and has shape
    ``(dL * dB, dK * dA)``. The Frobenius norm is unchanged.
    """
    u = _as_matrix(u)
    dk, dl = _check_partition(row_part, u.shape[0], "rotate_clockwise rows")
    da, db = _check_partition(col_part, u.shape[1], "rotate_clockwise cols")
    t = u.reshape(dk, dl, da, db)
    return np.ascontiguousarray(t.transpose(1, 3, 0, 2)).reshape(dl * db, dk * da)


def rotate_counterclockwise(uo, row_part: Partition, col_part: Partition) -> np.ndarray:
    """Inverse of :func:`rotate_clockwise` for the same partitions of the original ``u``."""
    uo = _as_matrix(uo)
    dk, dl = (int(d) for d in row_part)
    da, db = (int(d) for d in col_part)
    if uo.shape != (dl * db, dk * da):
        raise PartitionError(f"rotated matrix has shape {uo.shape}, expected {(dl * db, dk * da)}")
    t = uo.reshape(dl, db, dk, da)
    return np.ascontiguousarray(t.transpose(2, 0, 3, 1)).reshape(dk * dl, da * db)


def svd(m) -> SvdFactors:
    """Thin singular value decomposition ``m = W diag(s) V^dagger``."""
    m = _as_matrix(m)
    try:
        w, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"SVD did not converge for a {m.shape[0]}x{m.shape[1]} matrix") from exc
    return SvdFactors(w, s, vh)


def schatten_norm(m, p: float = 2) -> float:
    """Schatten p-norm ``(sum_i s_i^p)^(1/p)``; ``p = inf`` gives the largest singular value."""
    if not p >= 1:
        raise ValueError(f"Schatten norms need p >= 1, got {p}")
    s = svd(m).singulars
    if s.size == 0:
        return 0.0
    if np.isinf(p):
        return float(s[0])
    if p == 1:
        return float(s.sum())
    if p == 2:
        return float(np.sqrt(np.sum(s * s)))
    return float(np.sum(s**p) ** (1.0 / p))


def polar_coisometry(m) -> np.ndarray:
    """Partial isometry ``R = V W^dagger`` maximizing ``Re Tr[R m]``.

    With the thin SVD ``m = W S V^dagger`` we get ``Tr[R m] = ||m||_1``. For
    ``rows >= cols`` the result is a coisometry (``R R^dagger = I``),
    otherwise an isometry.
    """
    f = svd(m)
    return dagger(f.right_adj) @ dagger(f.left)


def abs_left(m) -> np.ndarray:
    """``|m^dagger| = sqrt(m m^dagger) = W S W^dagger``."""
    f = svd(m)
    return (f.left * f.singulars) @ dagger(f.left)


def pinv_on_support(h, rel_tol: float = 1e-10) -> np.ndarray:
    """Pseudo-inverse of a Hermitian PSD matrix.

    Eigenvalues above ``rel_tol * lambda_max`` are inverted, the rest are
    dropped.
    """
    h = _as_matrix(h)
    if h.shape[0] != h.shape[1]:
        raise ValueError(f"pinv_on_support needs a square matrix, got {h.shape}")
    scale = np.linalg.norm(h, 2) if h.size else 0.0
    if np.linalg.norm(h - dagger(h), 2) > 1e-10 * max(scale, 1e-300):
        raise ValueError("pinv_on_support needs a Hermitian matrix")
    evals, evecs = np.linalg.eigh((h + dagger(h)) / 2)
    lmax = evals.max(initial=0.0)
    if lmax <= 0:
        return np.zeros_like(h, dtype=complex)
    keep = evals > rel_tol * lmax
    inv = np.zeros_like(evals)
    inv[keep] = 1.0 / evals[keep]
    return (evecs * inv) @ dagger(evecs)


def complete_to_unitary(r, dep_tol: float = 1e-8) -> np.ndarray:
    """Extend a coisometry to a square unitary whose leading rows are ``r``.

    Extra rows come from Gram-Schmidt on the canonical basis vectors, in
    index order; candidates whose residual norm is below ``dep_tol`` are
    skipped. Deterministic.
    """
    r = np.asarray(_as_matrix(r), dtype=complex)
    c, n = r.shape
    if c > n:
        raise ValueError(f"a {c}x{n} matrix cannot be a coisometry")
    if np.linalg.norm(r @ dagger(r) - np.eye(c), 2) > 1e-8:
        raise ValueError("input rows are not orthonormal (not a coisometry)")
    rows = [row for row in r]
    basis = np.asarray(rows) if rows else np.zeros((0, n), dtype=complex)
    for i in range(n):
        if len(rows) == n:
            break
        v = np.zeros(n, dtype=complex)
        v[i] = 1.0
        for _ in range(2):
            v = v - basis.T @ (basis.conj() @ v)
        nv = np.linalg.norm(v)
        if nv < dep_tol:
            continue
        rows.append(v / nv)
        basis = np.asarray(rows)
    return np.asarray(rows)
