"""Differential (non-coherent) transmission over the same relay scheme.

The source encodes every subcarrier recursively,
``s^0 = [sqrt(R), 0, ..., 0]`` and ``s^t = C_t s^{t-1} / a_{t-1}``, where
``C_t`` is a scaled unitary matrix with ``C_t^H C_t = a_t^2 I`` and
``a_0 = 1``. If each codeword commutes with the plain relays' ``A_i`` and
satisfies ``C A_i = A_i conj(C)`` for the conjugating ones, the received
vectors obey ``y^t = C_t y^{t-1} / a_{t-1} + noise`` whatever the channel
gains and delays, so the decoder needs only the last two received vectors.
"""

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .constellation import FOURGROUP_GROUPS, GroupSignalSet, differential_points
from .decoder import GroupDecodingWarning, group_search, is_separable, ml_search

__all__ = [
    "DifferentialCodebook",
    "CommutationReport",
    "EncodingError",
    "build_fourgroup_diff_r4",
    "check_commutation",
    "diff_encode",
    "diff_decode",
    "diff_decode_frames",
    "DifferentialDecoder",
    "reference_vector",
]


class EncodingError(ValueError):
    """A message is not a codeword of the codebook."""


@dataclass(frozen=True, eq=False)
class DifferentialCodebook:
    """Codebook ``C(z) = sum_r z_r D[r]`` over a grouped real signal set.

    ``D`` has shape (2K, R, R); ``z`` ranges over ``signal_set``'s codebook
    of real vectors.
    """

    D: np.ndarray
    signal_set: GroupSignalSet
    name: str = ""

    @property
    def R(self):
        return self.D.shape[-1]

    @property
    def group_partition(self):
        return self.signal_set.groups

    def __len__(self):
        return len(self.signal_set)

    @cached_property
    def matrices(self):
        """All codewords, shape (len, R, R), in signal-set order."""
        return np.einsum("cr,rij->cij", self.signal_set.codebook_real, self.D)

    @cached_property
    def scales(self):
        """``a`` per codeword, from ``C^H C = a^2 I``."""
        C = self.matrices
        return np.sqrt(np.einsum("cij,cij->c", C.conj(), C).real / self.R)

    def matrix(self, idx):
        return self.matrices[idx]

    def index_of(self, C, atol=1e-9):
        """Codebook index of matrix ``C``; raises `EncodingError` if absent."""
        d = np.max(np.abs(self.matrices - np.asarray(C)[None]), axis=(-1, -2))
        i = int(np.argmin(d))
        if d[i] > atol:
            raise EncodingError("matrix is not a codeword of the codebook")
        return i


def build_fourgroup_diff_r4():
    """256-codeword R=4 codebook, four groups of two real symbols.

    ::

        C = 1/2 [ z1  z2  -z3* -z4* ]
                [ z2  z1  -z4* -z3* ]
                [ z3  z4   z1*  z2* ]
                [ z4  z3   z2*  z1* ]

    with ``(z1I, z2I)``, ``(z1Q, z2Q)``, ``(z3I, z4I)``, ``(z3Q, z4Q)`` each
    drawn from the four-point set of `differential_points`.
    """
    # (row, col, symbol, conjugated, sign)
    layout = [
        (0, 0, 0, False, 1), (0, 1, 1, False, 1), (0, 2, 2, True, -1), (0, 3, 3, True, -1),
        (1, 0, 1, False, 1), (1, 1, 0, False, 1), (1, 2, 3, True, -1), (1, 3, 2, True, -1),
        (2, 0, 2, False, 1), (2, 1, 3, False, 1), (2, 2, 0, True, 1), (2, 3, 1, True, 1),
        (3, 0, 3, False, 1), (3, 1, 2, False, 1), (3, 2, 1, True, 1), (3, 3, 0, True, 1),
    ]
    D = np.zeros((8, 4, 4), dtype=complex)
    for i, j, p, c, sgn in layout:
        D[p, i, j] += 0.5 * sgn
        D[4 + p, i, j] += 0.5 * sgn * (-1j if c else 1j)
    pts = differential_points()
    ss = GroupSignalSet(4, FOURGROUP_GROUPS, (pts,) * 4, name="diff-four-point")
    return DifferentialCodebook(D, ss, name="fourgroup_diff_r4")


@dataclass
class CommutationReport:
    passed: bool
    max_error: float
    witness: tuple = None  # (relay index, codeword index)


def check_commutation(codebook, code, tol=1e-10):
    """Check ``C A_i = A_i C`` (plain relays) and ``C A_i = A_i C*`` (others)."""
    if code.T != codebook.R or code.K != codebook.R:
        raise ValueError(f"code is {code.T}x{code.K} per relay, codebook is "
                         f"{codebook.R}x{codebook.R}")
    C = codebook.matrices
    worst, witness = 0.0, None
    for i, (A, conj) in enumerate(zip(code.A, code.conj)):
        rhs = A @ (np.conj(C) if conj else C)
        err = np.max(np.abs(C @ A - rhs), axis=(-1, -2))
        bad = np.flatnonzero(err > tol)
        if witness is None and bad.size:
            witness = (i, int(bad[0]))
        worst = max(worst, float(err.max()))
    return CommutationReport(witness is None, worst, witness)


def reference_vector(R):
    s = np.zeros(R, dtype=complex)
    s[0] = np.sqrt(R)
    return s


def diff_encode(messages, codebook):
    """Differentially encode codeword indices.

    Parameters
    ----------
    messages : array_like of int, shape (..., T)
        Codebook indices of ``C_1 .. C_T``; matrices of shape
        (..., T, R, R) are also accepted and looked up.

    Returns
    -------
    ndarray, shape (..., T + 1, R)
        ``s^0 .. s^T``.
    """
    messages = np.asarray(messages)
    R = codebook.R
    if messages.dtype.kind in "fc":
        if messages.shape[-2:] != (R, R):
            raise EncodingError(f"codeword matrices must be {R}x{R}")
        flat = messages.reshape((-1, R, R))
        messages = np.array([codebook.index_of(C) for C in flat],
                            dtype=int).reshape(messages.shape[:-2])
    elif messages.dtype.kind not in "iu":
        raise EncodingError("messages must be codebook indices or codeword matrices")
    if np.any((messages < 0) | (messages >= len(codebook))):
        raise EncodingError("codeword index out of range")
    T = messages.shape[-1]
    C = codebook.matrices[messages]
    a = codebook.scales[messages]
    s = np.zeros(messages.shape[:-1] + (T + 1, R), dtype=complex)
    s[..., 0, :] = reference_vector(R)
    prev_a = np.ones(messages.shape[:-1])
    for t in range(T):
        s[..., t + 1, :] = np.einsum("...ij,...j->...i", C[..., t, :, :],
                                     s[..., t, :]) / prev_a[..., None]
        prev_a = a[..., t]
    return s


def _diff_basis(codebook, y_prev, prev_scale):
    ref = np.asarray(y_prev, dtype=complex) / np.asarray(prev_scale)[..., None]
    return np.einsum("rij,...j->...ri", codebook.D, ref)


def diff_decode(y_t, y_prev, codebook, prev_scale=1.0, grouped=False, stats=None):
    """Index of ``argmin_C ||y_t - C y_prev / a_prev||``.

    Only the two received vectors and the previous decision's scale enter;
    channel gains and delays are never needed. Works on stacked inputs
    (..., R). With ``grouped=True`` each real-symbol group is searched
    separately wherever the metric separates.
    """
    y_t = np.asarray(y_t, dtype=complex)
    B = _diff_basis(codebook, y_prev, prev_scale)
    ss = codebook.signal_set
    if not grouped:
        return ml_search(y_t, B, ss.codebook_real, stats)
    sep = is_separable(B, ss.groups)
    if np.ndim(sep) == 0:
        if not sep:
            warnings.warn("differential metric is not group separable; using full ML",
                          GroupDecodingWarning, stacklevel=2)
            return ml_search(y_t, B, ss.codebook_real, stats)
        return ss.flat_index(group_search(y_t, B, ss, stats))
    out = np.empty(sep.shape, dtype=int)
    if np.any(sep):
        out[sep] = ss.flat_index(group_search(y_t[sep], B[sep], ss))
    if not np.all(sep):
        out[~sep] = ml_search(y_t[~sep], B[~sep], ss.codebook_real)
    return out


def diff_decode_frames(y, codebook, grouped=True):
    """Decision-directed decoding of a run of received vectors.

    ``y`` has shape (..., T + 1, R) with the reference frame first. The
    scale used for frame t is that of the decision for frame t - 1
    (``a_0 = 1``). Returns indices of shape (..., T).
    """
    y = np.asarray(y, dtype=complex)
    T = y.shape[-2] - 1
    prev_scale = np.ones(y.shape[:-2])
    out = np.empty(y.shape[:-2] + (T,), dtype=int)
    for t in range(T):
        idx = diff_decode(y[..., t + 1, :], y[..., t, :], codebook, prev_scale, grouped)
        out[..., t] = idx
        prev_scale = codebook.scales[idx]
    return out


class DifferentialDecoder:
    """Stateful per-stream decoder holding the previous vector and scale."""

    def __init__(self, codebook, grouped=True):
        self.codebook = codebook
        self.grouped = grouped
        self.prev_y = None
        self.prev_scale = 1.0

    def reset(self, y_reference):
        self.prev_y = np.asarray(y_reference, dtype=complex)
        self.prev_scale = 1.0

    def step(self, y):
        if self.prev_y is None:
            raise RuntimeError("decoder needs a reference vector first (call reset)")
        idx = diff_decode(y, self.prev_y, self.codebook, self.prev_scale, self.grouped)
        self.prev_y = np.asarray(y, dtype=complex)
        self.prev_scale = float(self.codebook.scales[idx])
        return int(idx)
