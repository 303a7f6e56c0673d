import numpy as np
import pytest

from ofdm_dstc import ofdm
from ofdm_dstc.channel import ChannelRealization, PowerConfig, crandn, relay_amplify_gain
from ofdm_dstc.dstbc import (
    IDFT,
    Action,
    RelaySchedule,
    ScheduleError,
    builtin_code,
    derive_relay_schedule,
)
from ofdm_dstc.transceiver import (
    build_subcarrier_model,
    destination_frontend,
    dump_frame_csv,
    equivalent_channel,
    noise_covariance,
    relay_process,
    relay_receive,
    relay_transmit,
    run_frames,
    source_encode,
    superpose,
)

from conftest import BUILTINS, noiseless_model_error

N, L_CP = 64, 16


@pytest.mark.parametrize("name", BUILTINS)
def test_waveform_matches_model(rng, name):
    assert noiseless_model_error(name, rng, 50, L_CP) < 1e-9


@pytest.mark.parametrize("name", BUILTINS)
def test_delay_beyond_prefix_breaks_model(rng, name):
    assert noiseless_model_error(name, rng, 10, L_CP + 1) > 1e-3


def test_zero_delay_alamouti_exact(rng):
    code = builtin_code("alamouti")
    sched = derive_relay_schedule(code)
    cfg = PowerConfig.default(4.0, 2)
    s = crandn(rng, (N, 2))
    f, g = crandn(rng, 2), crandn(rng, 2)
    y = run_frames(s, sched, cfg, L_CP, f, g, np.zeros(2, int), rng, 0.0, 0.0)
    for k in (0, 17, 63):
        sys_k = build_subcarrier_model(code, ChannelRealization(f, g, [0, 0]), cfg, k, N)
        np.testing.assert_allclose(y[k], sys_k.mean(s[k]), atol=1e-12)


def test_source_modulation_and_power(rng):
    code = builtin_code("fourgroup_r4")
    sched = derive_relay_schedule(code)
    cfg = PowerConfig(P=8.0, pi1=0.5, pi2=0.125)
    s = crandn(rng, (400, N, 4))
    blocks = source_encode(s, sched, cfg, L_CP)
    assert blocks.shape == (400, 4, N + L_CP)
    body = blocks[0, 2, L_CP:] / cfg.source_amplitude
    np.testing.assert_allclose(body, ofdm.dft(s[0, :, 2]), atol=1e-12)
    assert np.mean(np.abs(blocks) ** 2) == pytest.approx(cfg.pi1 * cfg.P, rel=0.03)


def test_loopback_single_relay(rng):
    # one plain relay, identity code: the destination sees the symbols back
    code = builtin_code("fourgroup_r4")
    sched = derive_relay_schedule(code)
    cfg = PowerConfig.default(10.0, 4)
    s = crandn(rng, (N, 4))
    f = np.array([1, 0, 0, 0], complex)
    y = run_frames(s, sched, cfg, L_CP, f, f, np.zeros(4, int), rng, 0.0, 0.0)
    np.testing.assert_allclose(y / cfg.signal_scale, s, atol=1e-10)


def test_relay_power(rng):
    code = builtin_code("fourgroup_r4")
    sched = derive_relay_schedule(code)
    cfg = PowerConfig(P=20.0, pi1=0.5, pi2=0.125)
    s = crandn(rng, (300, N, 4))
    f = crandn(rng, (300, 4))
    rx = relay_receive(source_encode(s, sched, cfg, L_CP), f, rng, 1.0)
    # normalise out the fading so power is measured per unit |f|^2
    rx = rx / np.sqrt((np.abs(f) ** 2 * cfg.pi1 * cfg.P + 1) / (cfg.pi1 * cfg.P + 1))[..., None, None]
    tx = relay_transmit(rx, sched, cfg, L_CP)
    assert np.mean(np.abs(tx) ** 2) == pytest.approx(cfg.pi2 * cfg.P, rel=0.03)


def test_relay_actions(rng):
    code = builtin_code("fourgroup_r4")
    sched = derive_relay_schedule(code)
    cfg = PowerConfig.default(10.0, 4)
    rx = crandn(rng, (4, N + L_CP))
    out = relay_process(rx, sched, 2, cfg, L_CP)
    rho = relay_amplify_gain(cfg)
    want = ofdm.add_cs(ofdm.zeta(np.conj(rx[0, L_CP:])), L_CP) * rho
    np.testing.assert_allclose(out[2], want)
    # silent slot in a sparse code
    e1 = derive_relay_schedule(builtin_code("example1_r5"))
    out = relay_process(crandn(rng, (6, N + L_CP)), e1, 4, cfg, L_CP)
    assert not out[:4].any() and out[4:].any()


def test_illegal_action_rejected(rng):
    sched = derive_relay_schedule(builtin_code("alamouti"))
    bad = list(map(list, sched.actions))
    bad[0][0] = Action(block=0, sign=1, conj=False, reversed=True)
    broken = type(sched)(sched.source_modulation, sched.reversed_slots,
                         tuple(map(tuple, bad)), sched.relay_conj, sched.relay_order)
    with pytest.raises(ScheduleError):
        broken.check()
    with pytest.raises(ScheduleError):
        relay_process(crandn(rng, (2, N + L_CP)), broken, 0, PowerConfig.default(1.0, 2), L_CP)


def test_zero_input_zero_output():
    sched = derive_relay_schedule(builtin_code("alamouti"))
    y = destination_frontend(np.zeros(2 * (N + L_CP) + 5), sched, N, L_CP)
    assert y.shape == (N, 2) and not y.any()


def test_superpose_batched_matches_loop(rng):
    tx = crandn(rng, (3, 2, 2, 10))
    g = crandn(rng, (3, 2))
    tau = np.array([[0, 3], [0, 0], [0, 5]])
    out = superpose(tx, g, tau, rng, 0.0)
    for b in range(3):
        ref = np.zeros(20 + 5, complex)
        for i in range(2):
            ref[tau[b, i]:tau[b, i] + 20] += g[b, i] * tx[b, i].ravel()
        np.testing.assert_allclose(out[b, :25], ref)


def test_equivalent_channel_phases():
    code = builtin_code("fourgroup_r4")
    f = np.array([1j, 2, 1 + 1j, -1])
    g = np.array([1, 1j, 2, 0.5])
    tau = np.array([0, 1, 4, 15])
    h = equivalent_channel(code, f, g, tau, N)
    k = 5
    u = np.exp(-2j * np.pi * k * tau / N)
    np.testing.assert_allclose(h[k], u * np.array([1j * 1, 2 * 1j, (1 - 1j) * 2, -0.5]))


def test_covariance_examples():
    cfg = PowerConfig.default(10.0, 2)
    rho2 = relay_amplify_gain(cfg) ** 2
    sched = derive_relay_schedule(builtin_code("alamouti"))
    g = np.exp(1j * np.array([0.3, 2.0]))
    om = noise_covariance(sched, g, cfg, N)
    np.testing.assert_allclose(om[7], (1 + 2 * rho2) * np.eye(2))
    e1 = derive_relay_schedule(builtin_code("example1_r5"))
    g5 = np.zeros(5, complex)
    g5[4] = 1.0
    om = noise_covariance(e1, g5, cfg, N)[3]
    assert om[0, 0] == 1 and om[4, 4] == pytest.approx(1 + rho2)


def _empirical_noise(sched, cfg, g, n_trials, rng):
    K = sched.K
    zeros = np.zeros((n_trials, N, K), complex)
    R = sched.R
    ones = np.ones((n_trials, R), complex)
    tau = np.zeros((n_trials, R), int)
    return run_frames(zeros, sched, cfg, L_CP, ones, np.broadcast_to(g, (n_trials, R)),
                      tau, rng, 1.0, 1.0)


@pytest.mark.parametrize("name", ["alamouti", "fourgroup_r4"])
def test_covariance_monte_carlo(rng, name):
    code = builtin_code(name)
    sched = derive_relay_schedule(code)
    cfg = PowerConfig.default(30.0, code.R)
    g = crandn(rng, code.R)
    y = _empirical_noise(sched, cfg, g, 100000 // N + 1, rng)
    om = noise_covariance(sched, g, cfg, N)
    for k in (0, 9):
        emp = np.einsum("bi,bj->ij", y[:, k], np.conj(y[:, k])) / y.shape[0]
        pooled = np.einsum("bki,bkj->ij", y, np.conj(y)) / (y.shape[0] * N)
        scale = np.max(np.abs(om[k]))
        assert np.max(np.abs(pooled - om[k])) < 0.03 * scale
        assert np.max(np.abs(emp - om[k])) < 0.2 * scale


def test_covariance_with_reused_block(rng):
    # one relay forwards the same block in two slots with opposite signs, so
    # both slots carry the same relay noise and are negatively correlated
    sched = RelaySchedule((IDFT,), frozenset(),
                          ((Action(0, 1, False, False), Action(0, -1, False, False)),),
                          (False,), (0,))
    cfg = PowerConfig(P=30.0, pi1=0.5, pi2=0.5)
    g = np.array([0.8 + 0.3j])
    rho2 = relay_amplify_gain(cfg) ** 2
    om = noise_covariance(sched, g, cfg, N)
    w = rho2 * abs(g[0]) ** 2
    np.testing.assert_allclose(om[3], [[1 + w, -w], [-w, 1 + w]])
    y = _empirical_noise(sched, cfg, g, 2000, rng)
    pooled = np.einsum("bki,bkj->ij", y, np.conj(y)) / (y.shape[0] * N)
    assert np.max(np.abs(pooled - om[3])) < 0.03 * np.abs(om[3]).max()


def test_frame_dump(tmp_path, rng):
    tx = crandn(rng, (2, 2, 5))
    path = tmp_path / "frame.csv"
    dump_frame_csv(path, tx)
    rows = path.read_text().splitlines()
    assert rows[0] == "slot,relay,sample,re,im"
    assert len(rows) == 1 + 20
    slot, relay, sample, re, im = rows[1].split(",")
    assert (slot, relay, sample) == ("1", "1", "0")
    assert complex(float(re), float(im)) == tx[0, 0, 0]
