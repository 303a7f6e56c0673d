"""Fading, delays, noise and power bookkeeping for the two-phase relay link.

Fading gains are unit-variance circularly-symmetric complex Gaussians.
Delays are integer sample offsets with the first relay as timing reference.
Noise at relays and destination has unit variance, so the total power ``P``
doubles as the SNR (``SNR_dB = 10 log10 P``).
"""

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelRealization",
    "PowerConfig",
    "CpViolationWarning",
    "sample_channel",
    "crandn",
    "awgn",
    "relay_amplify_gain",
    "superpose_at_destination",
    "snr_db_to_power",
]


class CpViolationWarning(UserWarning):
    """A relay delay is longer than the cyclic prefix."""


@dataclass(frozen=True)
class ChannelRealization:
    """Channel state for one coherence interval.

    Attributes
    ----------
    f : ndarray, shape (R,)
        Source-to-relay gains.
    g : ndarray, shape (R,)
        Relay-to-destination gains.
    tau : ndarray of int, shape (R,)
        Arrival offsets at the destination in samples, ``tau[0] == 0`` and
        nondecreasing.
    """

    f: np.ndarray
    g: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=complex)
        g = np.asarray(self.g, dtype=complex)
        tau = np.asarray(self.tau, dtype=int)
        if not (f.shape == g.shape == tau.shape) or f.ndim != 1:
            raise ValueError("f, g and tau must be 1-D arrays of equal length")
        if tau[0] != 0 or np.any(np.diff(tau) < 0):
            raise ValueError(f"delays must start at 0 and be nondecreasing: {tau}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "tau", tau)

    @property
    def R(self):
        return self.f.shape[0]

    def scaled(self, g_factor):
        """Copy with every relay-destination gain multiplied by ``g_factor``."""
        return ChannelRealization(self.f, self.g * g_factor, self.tau)


@dataclass(frozen=True)
class PowerConfig:
    """Total power ``P`` and its split between source and relay phases.

    ``pi2`` is the fraction used by *each* relay.
    """

    P: float
    pi1: float
    pi2: float

    def __post_init__(self):
        if self.P < 0:
            raise ValueError(f"total power must be nonnegative, got {self.P}")
        if self.pi1 <= 0 or self.pi2 <= 0:
            raise ValueError("power fractions pi1 and pi2 must be positive")

    @classmethod
    def default(cls, P, R):
        """Half the power to the source, the other half shared by R relays."""
        return cls(P=P, pi1=0.5, pi2=0.5 / R)

    @property
    def source_amplitude(self):
        return np.sqrt(self.pi1 * self.P)

    @property
    def signal_scale(self):
        """Composite end-to-end amplitude ``sqrt(pi1 pi2 P^2 / (pi1 P + 1))``."""
        return self.source_amplitude * relay_amplify_gain(self)


def snr_db_to_power(snr_db):
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def crandn(rng, size, variance=1.0):
    """Circularly-symmetric complex Gaussian samples of the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def sample_channel(rng, R, tau_max):
    """Draw fading gains and sorted integer delays for R relays.

    ``tau[0]`` is pinned to zero; the other R-1 delays are uniform on
    ``{0, ..., tau_max}`` and sorted.
    """
    if tau_max < 0:
        raise ValueError(f"tau_max must be nonnegative, got {tau_max}")
    f = crandn(rng, R)
    g = crandn(rng, R)
    rest = np.sort(rng.integers(0, tau_max + 1, size=R - 1))
    tau = np.concatenate([[0], rest]).astype(int)
    return ChannelRealization(f, g, tau)


def awgn(rng, block, noise_variance):
    """Add complex white Gaussian noise of per-sample variance ``noise_variance``."""
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    block = np.asarray(block, dtype=complex)
    if noise_variance == 0:
        return block.copy()
    return block + crandn(rng, block.shape, noise_variance)


def relay_amplify_gain(cfg):
    """Relay scaling ``sqrt(pi2 P / (pi1 P + 1))``.

    A relay receives average power ``pi1 P + 1`` per sample (signal plus unit
    noise), so this gain brings its transmit power to ``pi2 P``.
    """
    return np.sqrt(cfg.pi2 * cfg.P / (cfg.pi1 * cfg.P + 1.0))


def superpose_at_destination(transmissions, h, rng=None, noise_variance=0.0,
                             l_cp=None):
    """Combine relay streams at the destination.

    Parameters
    ----------
    transmissions : array_like, shape (R, L) or (R, T, N + l_cp)
        Relay transmit streams; per-slot blocks are concatenated in order.
    h : ChannelRealization
        Gains ``g`` and integer delays ``tau`` are applied here; ``f`` has
        already acted at the relays.
    rng : numpy.random.Generator, optional
        Needed only when ``noise_variance > 0``.
    noise_variance : float
        Destination noise variance per sample.
    l_cp : int, optional
        When given, delays longer than the prefix raise a
        :class:`CpViolationWarning`; the superposition is computed anyway.

    Returns
    -------
    ndarray, shape (L + max(tau),)
        ``sum_i g_i tx_i(t - tau_i)`` plus noise. Relays are silent outside
        their own transmission window.
    """
    streams = np.asarray(transmissions, dtype=complex)
    if streams.shape[0] != h.R:
        raise ValueError(f"{streams.shape[0]} streams for {h.R} relays")
    streams = streams.reshape(h.R, -1)
    length = streams.shape[1]
    if l_cp is not None and h.tau.max() > l_cp:
        warnings.warn(
            f"relay delay {h.tau.max()} exceeds cyclic prefix {l_cp}",
            CpViolationWarning, stacklevel=2)
    out = np.zeros(length + int(h.tau.max()), dtype=complex)
    for s, gi, ti in zip(streams, h.g, h.tau):
        out[ti:ti + length] += gi * s
    if noise_variance > 0:
        out = awgn(rng, out, noise_variance)
    return out
