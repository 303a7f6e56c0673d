"""Waveform pipeline and the per-subcarrier model it implements.

Frame layout: the source broadcasts K cyclic-prefixed blocks, then the
relays transmit T slots of length ``N + l_cp`` each. Arrays carry optional
leading batch axes (independent frames) so a whole batch goes through the
pipeline in one pass.

In a reversed slot a relay sends ``zeta(body)`` followed by a cyclic suffix
(`ofdm.add_cs`), which is what reversing a whole prefixed block produces.
The destination drops the first ``l_cp`` samples of every slot and, in
reversed slots, rotates the tail back to the front (`ofdm.dest_shift`).
Any delay up to ``l_cp`` then shows up as the subcarrier phase
``exp(-2j pi k tau / N)`` in every slot.
"""

import csv
from dataclasses import dataclass

import numpy as np

from . import ofdm
from .channel import ChannelRealization, crandn, relay_amplify_gain
from .dstbc import IDFT, ScheduleError, is_legal_action

__all__ = [
    "SubcarrierSystem",
    "source_encode",
    "relay_receive",
    "relay_process",
    "relay_transmit",
    "superpose",
    "destination_frontend",
    "equivalent_channel",
    "noise_covariance",
    "build_subcarrier_model",
    "run_frames",
    "dump_frame_csv",
]


@dataclass(frozen=True, eq=False)
class SubcarrierSystem:
    """``y = signal_scale * X(s) h + n`` with ``Cov(n) = noise_cov``."""

    code: object
    h: np.ndarray
    signal_scale: float
    noise_cov: np.ndarray

    def mean(self, s):
        return self.signal_scale * self.code.codeword(s) @ self.h


def source_encode(symbols, schedule, cfg, l_cp):
    """Source OFDM blocks.

    Parameters
    ----------
    symbols : array_like, shape (..., N, K)
        ``symbols[..., k, p]`` is symbol p of the codeword on subcarrier k.
    schedule : RelaySchedule
        Supplies the IDFT/DFT choice per block.
    cfg : PowerConfig
    l_cp : int

    Returns
    -------
    ndarray, shape (..., K, N + l_cp)
        Prefixed blocks scaled by ``sqrt(pi1 P)``; unit-energy symbols give
        average power ``pi1 P``.
    """
    x = np.swapaxes(np.asarray(symbols, dtype=complex), -1, -2)
    if x.shape[-2] != schedule.K:
        raise ValueError(f"expected {schedule.K} symbols per codeword, got {x.shape[-2]}")
    blocks = np.empty_like(x)
    for p, mod in enumerate(schedule.source_modulation):
        blocks[..., p, :] = ofdm.idft(x[..., p, :]) if mod == IDFT else ofdm.dft(x[..., p, :])
    return cfg.source_amplitude * ofdm.add_cp(blocks, l_cp)


def relay_receive(source_blocks, f, rng=None, noise_variance=1.0):
    """Noisy copies at every relay: shape (..., R, K, L_s) from (..., K, L_s)."""
    f = np.asarray(f, dtype=complex)
    rx = f[..., :, None, None] * np.asarray(source_blocks)[..., None, :, :]
    if noise_variance > 0:
        rx = rx + crandn(rng, rx.shape, noise_variance)
    return rx


def relay_process(received, schedule, i, cfg, l_cp):
    """Slots transmitted by relay ``i``.

    Parameters
    ----------
    received : array_like, shape (..., K, N + l_cp)
        Blocks received by this relay during the source phase.

    Returns
    -------
    ndarray, shape (..., T, N + l_cp)
        ``rho * sign * op(r)`` per slot, zeros when silent. The prefix of the
        received block is discarded and the transmitted block is rebuilt
        from the processed body.

    Raises
    ------
    ScheduleError
        If an action is outside the allowed set for its block and slot.
    """
    received = np.asarray(received, dtype=complex)
    ls = received.shape[-1]
    n = ls - l_cp
    body = ofdm.remove_cp(received, l_cp, n)
    rho = relay_amplify_gain(cfg)
    out = np.zeros(received.shape[:-2] + (schedule.T, ls), dtype=complex)
    for m, a in enumerate(schedule.actions[i]):
        if a is None:
            continue
        if (a.conj != schedule.relay_conj[i]
                or a.reversed != (m in schedule.reversed_slots)
                or not is_legal_action(a, schedule.source_modulation[a.block])):
            raise ScheduleError(f"relay {i + 1}, slot {m + 1}: illegal action {a.label(i)}")
        b = body[..., a.block, :]
        if a.conj:
            b = np.conj(b)
        if a.reversed:
            out[..., m, :] = ofdm.add_cs(ofdm.zeta(b), l_cp)
        else:
            out[..., m, :] = ofdm.add_cp(b, l_cp)
        out[..., m, :] *= a.sign * rho
    return out


def relay_transmit(received, schedule, cfg, l_cp):
    """All relays at once: (..., R, K, L_s) -> (..., R, T, L_s)."""
    received = np.asarray(received)
    return np.stack([relay_process(received[..., i, :, :], schedule, i, cfg, l_cp)
                     for i in range(schedule.R)], axis=-3)


def superpose(tx, g, tau, rng=None, noise_variance=1.0):
    """Batched destination superposition.

    ``tx`` has shape (..., R, T, L_s); ``g`` and ``tau`` have shape (..., R).
    Returns (..., T * L_s + max tau) samples of ``sum_i g_i tx_i(t - tau_i)``
    plus destination noise.
    """
    tx = np.asarray(tx, dtype=complex)
    batch = tx.shape[:-3]
    R = tx.shape[-3]
    streams = tx.reshape(batch + (R, -1))
    length = streams.shape[-1]
    tau = np.broadcast_to(np.asarray(tau, dtype=int), batch + (R,))
    tmax = int(tau.max()) if tau.size else 0
    padded = np.concatenate(
        [np.zeros(batch + (R, tmax), dtype=complex), streams,
         np.zeros(batch + (R, tmax), dtype=complex)], axis=-1)
    t = np.arange(length + tmax)
    idx = tmax + t - tau[..., None]
    delayed = np.take_along_axis(padded, idx, axis=-1)
    out = np.einsum("...r,...rt->...t", np.asarray(g, dtype=complex), delayed)
    if noise_variance > 0:
        out = out + crandn(rng, out.shape, noise_variance)
    return out


def destination_frontend(stream, schedule, n, l_cp):
    """Per-slot CP removal, tail shift in reversed slots, DFT.

    Parameters
    ----------
    stream : array_like, shape (..., >= T (N + l_cp))
        Received samples, time zero at the start of relay 1's first slot.

    Returns
    -------
    ndarray, shape (..., N, T)
        ``y[..., k, m]`` is slot m on subcarrier k.
    """
    stream = np.asarray(stream, dtype=complex)
    ls = n + l_cp
    T = schedule.T
    slots = stream[..., :T * ls].reshape(stream.shape[:-1] + (T, ls))
    body = ofdm.remove_cp(slots, l_cp, n)
    rev = sorted(schedule.reversed_slots)
    if rev:
        body = body.copy()
        body[..., rev, :] = ofdm.dest_shift(body[..., rev, :], l_cp)
    return np.swapaxes(ofdm.dft(body), -1, -2)


def equivalent_channel(code, f, g, tau, n):
    """Per-subcarrier channel ``h_k``, shape (..., N, R).

    Entry i is ``u_k^tau_i f_i g_i`` for plain relays and
    ``u_k^tau_i conj(f_i) g_i`` for conjugating relays, with
    ``u_k = exp(-2j pi k / N)``.
    """
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    tau = np.asarray(tau)
    fc = np.where(np.array(code.conj), np.conj(f), f)
    k = np.arange(n)
    u = np.exp(-2j * np.pi * k[:, None] * tau[..., None, :] / n)
    return u * (fc * g)[..., None, :]


def _noise_tap(action):
    # Relay noise V = DFT(body noise) reaches subcarrier k of the destination
    # DFT as V[+k] or V[-k], conjugated or not.
    return (-1 if action.conj != action.reversed else 1), action.conj


def noise_covariance(schedule, g, cfg, n):
    """Covariance of the per-subcarrier noise vector, shape (..., N, T, T).

    Destination noise contributes the identity; relay i adds
    ``rho^2 |g_i|^2`` on each slot it is active in. Two slots in which the
    same relay forwards the same received block are correlated when both
    read the same tap of that block's noise spectrum.
    """
    g = np.asarray(g, dtype=complex)
    rho2 = relay_amplify_gain(cfg) ** 2
    T = schedule.T
    k = np.arange(n)
    self_mirror = (k == (-k) % n)
    cov = np.zeros(g.shape[:-1] + (n, T, T), dtype=complex)
    cov[...] = np.eye(T)
    for i, row in enumerate(schedule.actions):
        w = rho2 * np.abs(g[..., i]) ** 2
        for m, a in enumerate(row):
            if a is None:
                continue
            for mm, b in enumerate(row):
                if b is None or b.block != a.block:
                    continue
                (sa, ca), (sb, cb) = _noise_tap(a), _noise_tap(b)
                if ca != cb:
                    continue
                corr = np.ones(n) if sa == sb else self_mirror.astype(float)
                cov[..., :, m, mm] += (a.sign * b.sign * w)[..., None] * corr
    return cov


def build_subcarrier_model(code, realization, cfg, k, n, schedule=None):
    """Analytic model of subcarrier ``k`` for one channel realization."""
    if schedule is None:
        from .dstbc import derive_relay_schedule
        schedule = derive_relay_schedule(code)
    if not isinstance(realization, ChannelRealization):
        raise TypeError("realization must be a ChannelRealization")
    h = equivalent_channel(code, realization.f, realization.g, realization.tau, n)[k]
    cov = noise_covariance(schedule, realization.g, cfg, n)[k]
    return SubcarrierSystem(code, h, float(cfg.signal_scale), cov)


def run_frames(symbols, schedule, cfg, l_cp, f, g, tau, rng=None,
               relay_noise=1.0, dest_noise=1.0):
    """Source -> relays -> destination for a batch of frames.

    ``symbols`` has shape (..., N, K); ``f``, ``g``, ``tau`` have shape
    (..., R). Returns ``y`` with shape (..., N, T).
    """
    n = np.shape(symbols)[-2]
    src = source_encode(symbols, schedule, cfg, l_cp)
    rx = relay_receive(src, f, rng, relay_noise)
    tx = relay_transmit(rx, schedule, cfg, l_cp)
    stream = superpose(tx, g, tau, rng, dest_noise)
    return destination_frontend(stream, schedule, n, l_cp)


def dump_frame_csv(path, tx):
    """Write relay transmissions (R, T, L_s) as rows ``slot, relay, sample, re, im``.

    Slots and relays are 1-based; samples are 0-based within the slot.
    """
    tx = np.asarray(tx, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "relay", "sample", "re", "im"])
        R, T, ls = tx.shape
        for m in range(T):
            for i in range(R):
                for t in range(ls):
                    v = tx[i, m, t]
                    w.writerow([m + 1, i + 1, t, repr(float(v.real)), repr(float(v.imag))])
