"""Coherent ML and group decoding with noise whitening.

Every decoder here reduces to the same search. The received vector (after
whitening) is compared against ``sum_r x_r b_r``, where ``x`` is a
candidate's real-symbol vector and ``b_r`` are per-real-symbol basis
vectors, so the metric is::

    ||t - x @ B||^2 = ||t||^2 - 2 x . Re(B t^H) + x^T Re(B B^H) x

The linear part always splits over groups of real symbols. The quadratic
part splits when the Gram matrix ``Re(B B^H)`` has no cross-group entries,
and then each group can be searched on its own.
"""

import warnings

import numpy as np

from .constellation import GroupSignalSet, to_complex, to_real

__all__ = [
    "ConditioningError",
    "GroupDecodingWarning",
    "whitener",
    "metric",
    "ml_search",
    "group_search",
    "is_separable",
    "coherent_basis",
    "ml_decode",
    "group_decode",
    "decode_frames",
]

MAX_CODEBOOK = 2 ** 16


class ConditioningError(ValueError):
    """Covariance matrix is not numerically positive definite."""


class GroupDecodingWarning(UserWarning):
    """Group decoding was requested but the metric does not separate."""


def whitener(omega):
    """Inverse Hermitian square root ``W`` with ``W omega W^H = I``.

    Works on stacks of matrices (..., T, T).
    """
    omega = np.asarray(omega, dtype=complex)
    omega = 0.5 * (omega + np.conj(np.swapaxes(omega, -1, -2)))
    n = omega.shape[-1]
    diag = np.diagonal(omega, axis1=-2, axis2=-1).real
    if not np.any(omega[..., ~np.eye(n, dtype=bool)]):
        lam = np.sort(diag, axis=-1)
        V = None
    else:
        lam, V = np.linalg.eigh(omega)
    if np.any(lam[..., 0] <= 1e-12 * lam[..., -1]) or np.any(lam[..., -1] <= 0):
        raise ConditioningError(
            f"covariance is not positive definite (eigenvalues {lam.min():.3g}"
            f" .. {lam.max():.3g})")
    if V is None:
        # diagonal covariance: the inverse square root is elementwise
        return np.eye(n) * (1.0 / np.sqrt(diag))[..., None, :]
    return (V / np.sqrt(lam)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def metric(target, basis, cand_real):
    """Squared distances ``(..., C)`` between target and each candidate.

    target: (..., T); basis: (..., D, T); cand_real: (C, D).
    """
    pred = np.asarray(cand_real, dtype=float) @ basis
    diff = target[..., None, :] - pred
    return np.sum(diff.real ** 2 + diff.imag ** 2, axis=-1)


def ml_search(target, basis, cand_real, stats=None, chunk=4096):
    """Index of the closest candidate (lowest index on ties)."""
    cand_real = np.asarray(cand_real, dtype=float)
    n = cand_real.shape[0]
    if n == 0:
        raise ValueError("empty codebook")
    if n > MAX_CODEBOOK:
        raise ValueError(f"codebook of {n} entries exceeds the {MAX_CODEBOOK} cap")
    best = None
    for lo in range(0, n, chunk):
        d = metric(target, basis, cand_real[lo:lo + chunk])
        i = np.argmin(d, axis=-1)
        v = np.take_along_axis(d, i[..., None], axis=-1)[..., 0]
        if best is None:
            best, best_v = i + lo, v
        else:
            better = v < best_v
            best = np.where(better, i + lo, best)
            best_v = np.where(better, v, best_v)
    if stats is not None:
        stats["evaluations"] = stats.get("evaluations", 0) + n
    return best


def is_separable(basis, groups, tol=1e-9):
    """Whether cross-group Gram terms vanish (relative to the largest term).

    Returns a boolean array over the leading axes of ``basis``.
    """
    gram = (basis @ np.conj(np.swapaxes(basis, -1, -2))).real
    owner = np.empty(gram.shape[-1], dtype=int)
    for gi, grp in enumerate(groups):
        owner[list(grp)] = gi
    cross = owner[:, None] != owner[None, :]
    scale = np.max(np.abs(gram), axis=(-1, -2))
    worst = np.max(np.where(cross, np.abs(gram), 0.0), axis=(-1, -2))
    return worst <= tol * np.maximum(scale, np.finfo(float).tiny)


def group_search(target, basis, signal_set, stats=None):
    """Per-group point indices ``(..., G)`` by searching each group alone.

    The other groups are held at their first point. This equals the full ML
    decision whenever `is_separable` holds.
    """
    G = len(signal_set.groups)
    anchor = signal_set.real_from_indices(np.zeros(G, dtype=int))
    out = []
    for g, grp in enumerate(signal_set.groups):
        cand = np.repeat(anchor[None, :], signal_set.sizes[g], axis=0)
        cand[:, list(grp)] = signal_set.points[g]
        out.append(ml_search(target, basis, cand, stats))
    return np.stack(out, axis=-1)


def _full_indices(target, basis, signal_set, stats=None):
    flat = ml_search(target, basis, signal_set.codebook_real, stats)
    return signal_set.indices[flat]


def coherent_basis(code, h, omega, scale):
    """Whitened target transform and basis for the coherent metric.

    Returns ``(W, B)`` with ``B[..., r, :] = scale * W @ E_r @ h``.
    """
    W = whitener(omega)
    Eh = (code.dispersion() @ np.asarray(h)[..., None, :, None])[..., 0]
    return W, scale * (Eh @ np.swapaxes(W, -1, -2))


def _codebook_arrays(codebook):
    if isinstance(codebook, GroupSignalSet):
        return codebook.codebook, codebook.codebook_real
    book = np.atleast_2d(np.asarray(codebook, dtype=complex))
    if book.size == 0:
        raise ValueError("empty codebook")
    return book, to_real(book)


def ml_decode(y, system, codebook, stats=None):
    """Whitened ML decision for one subcarrier.

    Parameters
    ----------
    y : array_like, shape (T,)
    system : SubcarrierSystem
    codebook : GroupSignalSet or array_like of shape (C, K)

    Returns
    -------
    ndarray, shape (K,)
        The minimising symbol vector; ties go to the lowest codebook index.
    """
    book, real = _codebook_arrays(codebook)
    W, B = coherent_basis(system.code, system.h, system.noise_cov, system.signal_scale)
    target = W @ np.asarray(y, dtype=complex)
    return book[ml_search(target, B, real, stats)]


def group_decode(y, system, signal_set, stats=None):
    """Group-wise decision; falls back to `ml_decode` if the metric does not split."""
    W, B = coherent_basis(system.code, system.h, system.noise_cov, system.signal_scale)
    if not is_separable(B, signal_set.groups):
        warnings.warn("whitened metric is not group separable; using full ML",
                      GroupDecodingWarning, stacklevel=2)
        return ml_decode(y, system, signal_set, stats)
    target = W @ np.asarray(y, dtype=complex)
    idx = group_search(target, B, signal_set, stats)
    return to_complex(signal_set.real_from_indices(idx), signal_set.K)


def decode_frames(y, code, signal_set, h, omega, scale, grouped=True):
    """Batched coherent decoding: per-group indices ``(..., G)``.

    ``y``: (..., T); ``h``: (..., R); ``omega``: (..., T, T). With
    ``grouped=True`` the group search is used wherever the metric separates
    and full ML elsewhere.
    """
    W, B = coherent_basis(code, h, omega, scale)
    target = (W @ np.asarray(y, dtype=complex)[..., None])[..., 0]
    if not grouped or len(signal_set.groups) == 1:
        return _full_indices(target, B, signal_set)
    sep = is_separable(B, signal_set.groups)
    out = np.empty(target.shape[:-1] + (len(signal_set.groups),), dtype=int)
    if np.any(sep):
        out[sep] = group_search(target[sep], B[sep], signal_set)
    if not np.all(sep):
        out[~sep] = _full_indices(target[~sep], B[~sep], signal_set)
    return out
