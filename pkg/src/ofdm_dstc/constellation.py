"""Grouped real-symbol signal sets.

A codeword carries K complex symbols, i.e. 2K real symbols indexed as
``r[p] = Re s_p`` and ``r[K + p] = Im s_p``. A signal set partitions those
real symbols into groups and gives each group its own finite point set, so
the codebook is the Cartesian product of the group point sets. Group
decoders search each factor separately.
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np

__all__ = [
    "GroupSignalSet",
    "qpsk_points",
    "min_product_distance",
    "best_qpsk_rotation",
    "per_symbol_qpsk",
    "precoded_rotated_qpsk",
    "differential_points",
    "to_complex",
    "to_real",
    "FOURGROUP_GROUPS",
]


@dataclass(frozen=True, eq=False)
class GroupSignalSet:
    """Cartesian-product signal set over groups of real symbols.

    Parameters
    ----------
    K : int
        Complex symbols per codeword.
    groups : tuple of tuple of int
        Partition of ``range(2K)``.
    points : tuple of ndarray
        ``points[g]`` has shape ``(M_g, len(groups[g]))``. Point index ``j``
        is labelled with the ``log2(M_g)``-bit binary expansion of ``j``.
    """

    K: int
    groups: tuple
    points: tuple
    name: str = ""
    rotation_deg: float = None

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        points = tuple(np.asarray(p, dtype=float) for p in self.points)
        flat = sorted(i for g in groups for i in g)
        if flat != list(range(2 * self.K)):
            raise ValueError(f"groups {groups} do not partition 0..{2 * self.K - 1}")
        if len(points) != len(groups):
            raise ValueError("one point set per group required")
        for g, p in zip(groups, points):
            m = p.shape[0]
            if p.ndim != 2 or p.shape[1] != len(g):
                raise ValueError(f"points for group {g} must have {len(g)} columns")
            if m < 2 or m & (m - 1):
                raise ValueError("group point counts must be powers of two")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "points", points)

    @property
    def sizes(self):
        return tuple(p.shape[0] for p in self.points)

    @property
    def bits_per_group(self):
        return tuple(int(np.log2(m)) for m in self.sizes)

    @property
    def bits_per_codeword(self):
        return sum(self.bits_per_group)

    def __len__(self):
        return int(np.prod(self.sizes))

    def group_real(self, g, j=None):
        """Real-symbol vectors ``(M_g, 2K)`` for group g alone (others zero)."""
        idx = np.arange(self.sizes[g]) if j is None else np.atleast_1d(j)
        out = np.zeros((idx.size, 2 * self.K))
        out[:, list(self.groups[g])] = self.points[g][idx]
        return out

    def real_from_indices(self, idx):
        """Map per-group point indices ``(..., G)`` to real vectors ``(..., 2K)``."""
        idx = np.asarray(idx, dtype=int)
        out = np.zeros(idx.shape[:-1] + (2 * self.K,))
        for g, (grp, pts) in enumerate(zip(self.groups, self.points)):
            out[..., list(grp)] = pts[idx[..., g]]
        return out

    def bits_from_indices(self, idx):
        """Bit labels ``(..., bits_per_codeword)`` of per-group indices."""
        idx = np.asarray(idx, dtype=int)
        cols = []
        for g, nb in enumerate(self.bits_per_group):
            for b in range(nb - 1, -1, -1):
                cols.append((idx[..., g] >> b) & 1)
        return np.stack(cols, axis=-1).astype(np.uint8)

    @cached_property
    def indices(self):
        """All per-group index tuples, shape ``(len(self), G)``.

        The first group varies slowest, so row ``c`` is the mixed-radix
        expansion of ``c``.
        """
        grids = np.meshgrid(*[np.arange(m) for m in self.sizes], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    @cached_property
    def codebook_real(self):
        return self.real_from_indices(self.indices)

    @cached_property
    def codebook(self):
        """All symbol vectors, shape ``(len(self), K)``."""
        return to_complex(self.codebook_real, self.K)

    def flat_index(self, idx):
        idx = np.asarray(idx, dtype=int)
        return np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), self.sizes)

    def energy(self):
        """Average energy per complex symbol over the codebook."""
        return float(np.mean(np.sum(np.abs(self.codebook) ** 2, axis=-1)) / self.K)


def to_complex(real, K):
    real = np.asarray(real, dtype=float)
    return real[..., :K] + 1j * real[..., K:]


def to_real(s):
    s = np.asarray(s, dtype=complex)
    return np.concatenate([s.real, s.imag], axis=-1)


def qpsk_points(theta=0.0):
    """Unit-energy QPSK rotated by ``theta`` radians, Gray labelled.

    Row ``2*b0 + b1`` has in-phase sign ``(-1)**b0`` and quadrature sign
    ``(-1)**b1`` before rotation; returned as (I, Q) pairs.
    """
    b0, b1 = np.divmod(np.arange(4), 2)
    z = ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2) * np.exp(1j * theta)
    return np.stack([z.real, z.imag], axis=-1)


def min_product_distance(points):
    """Minimum over distinct pairs of ``|dx * dy|`` for 2-D points."""
    points = np.asarray(points, dtype=float)
    return min(abs((a[0] - b[0]) * (a[1] - b[1]))
               for a, b in combinations(points, 2))


def best_qpsk_rotation(step_deg=0.5, max_deg=45.0):
    """Grid-search the QPSK rotation (degrees) maximising `min_product_distance`.

    Ties go to the smallest angle.
    """
    angles = np.arange(0.0, max_deg + step_deg / 2, step_deg)
    cpd = [min_product_distance(qpsk_points(np.deg2rad(a))) for a in angles]
    best = int(np.argmax(np.round(cpd, 12)))
    return float(angles[best]), float(cpd[best])


def per_symbol_qpsk(K, theta=0.0):
    """Independent QPSK on every complex symbol; one group per symbol."""
    groups = tuple((p, K + p) for p in range(K))
    pts = qpsk_points(theta)
    return GroupSignalSet(K, groups, (pts,) * K, name="qpsk")


# 45-degree coordinate interleaving: a QPSK point (x, y) becomes the real
# pair ((x + y)/sqrt 2, (x - y)/sqrt 2), so a pair difference (a, b) has
# a^2 - b^2 = 2 dx dy and the code determinant tracks the product distance.
_PRECODER = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)

FOURGROUP_GROUPS = ((0, 1), (4, 5), (2, 3), (6, 7))


def precoded_rotated_qpsk(theta_deg=None):
    """Signal set for the R=4 four-group code: 2 bits per real-symbol pair.

    Groups are ``{s1I, s2I}``, ``{s1Q, s2Q}``, ``{s3I, s4I}``,
    ``{s3Q, s4Q}``. Each pair is a rotated QPSK point passed through the
    45-degree precoder. With ``theta_deg=None`` the rotation comes from
    `best_qpsk_rotation`.
    """
    if theta_deg is None:
        theta_deg, _ = best_qpsk_rotation()
    pts = qpsk_points(np.deg2rad(theta_deg)) @ _PRECODER.T
    return GroupSignalSet(4, FOURGROUP_GROUPS, (pts,) * 4,
                          name="precoded-rotated-qpsk", rotation_deg=theta_deg)


def differential_points():
    """The four-point real-pair set used by the R=4 differential codebook."""
    a = 1.0 / np.sqrt(3.0)
    b = np.sqrt(5.0 / 3.0)
    return np.array([[a, 0.0], [-a, 0.0], [0.0, b], [0.0, -b]])
