"""OFDM block primitives.

All transforms act on the last axis, so a stack of blocks with shape
``(..., N)`` is processed in one call. DFT and IDFT both carry the unitary
``1/sqrt(N)`` scale, and ``zeta`` is the cyclic reversal that keeps index 0
in place. With those two choices the following hold exactly::

    conj(dft(x))      == idft(conj(x))
    conj(idft(x))     == dft(conj(x))
    dft(zeta(dft(x))) == x
    dft(dft(x))       == zeta(x)
"""

import numpy as np

__all__ = [
    "dft",
    "idft",
    "zeta",
    "cyclic_delay",
    "add_cp",
    "add_cs",
    "remove_cp",
    "dest_shift",
    "is_power_of_two",
    "FramingError",
]


class FramingError(ValueError):
    """A block does not have the length its framing parameters imply."""


def is_power_of_two(n):
    n = int(n)
    return n >= 2 and (n & (n - 1)) == 0


def _as_block(x):
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0 or not is_power_of_two(x.shape[-1]):
        raise ValueError(
            f"block length must be a power of two >= 2, got shape {x.shape}")
    return x


def _check_cp_length(l_cp, n):
    if not 0 <= l_cp <= n:
        raise ValueError(f"cyclic prefix length {l_cp} outside [0, {n}]")


def dft(x):
    """Unitary N-point DFT along the last axis."""
    return np.fft.fft(_as_block(x), axis=-1, norm="ortho")


def idft(x):
    """Unitary N-point IDFT along the last axis (exact inverse of `dft`)."""
    return np.fft.ifft(_as_block(x), axis=-1, norm="ortho")


def zeta(x):
    """Cyclic time reversal: ``out[m] = x[(N - m) % N]``."""
    x = _as_block(x)
    return np.roll(x[..., ::-1], 1, axis=-1)


def cyclic_delay(x, d):
    """Rotate samples right by ``d`` (``out[m] = x[(m - d) % N]``)."""
    return np.roll(np.asarray(x, dtype=complex), int(d), axis=-1)


def add_cp(x, l_cp):
    """Prepend the last ``l_cp`` samples of each block."""
    x = _as_block(x)
    n = x.shape[-1]
    _check_cp_length(l_cp, n)
    return np.concatenate([x[..., n - l_cp:], x], axis=-1)


def add_cs(x, l_cs):
    """Append the first ``l_cs`` samples of each block (cyclic suffix).

    This is the framing a relay uses for a time-reversed slot: the result is
    still an N-periodic segment, but it starts with ``x[0]`` instead of
    ``x[N - l_cs]``. The destination undoes the offset with `dest_shift`.
    """
    x = _as_block(x)
    n = x.shape[-1]
    _check_cp_length(l_cs, n)
    return np.concatenate([x, x[..., :l_cs]], axis=-1)


def remove_cp(block, l_cp, n):
    """Return the last ``n`` samples of a block of length ``n + l_cp``.

    Raises
    ------
    FramingError
        If the block length is not ``n + l_cp``.
    """
    block = np.asarray(block, dtype=complex)
    if block.shape[-1] != n + l_cp:
        raise FramingError(
            f"expected block length {n + l_cp} (N={n}, l_cp={l_cp}), "
            f"got {block.shape[-1]}")
    return block[..., l_cp:]


def dest_shift(x, l_cp):
    """Move the last ``l_cp`` samples to the front.

    ``[x_{N-l}, ..., x_{N-1}, x_0, ..., x_{N-l-1}]``; equivalently a cyclic
    delay by ``l_cp``.
    """
    x = _as_block(x)
    _check_cp_length(l_cp, x.shape[-1])
    return np.roll(x, int(l_cp), axis=-1)
