import numpy as np
import pytest
from hypothesis import settings

from ofdm_dstc.channel import PowerConfig, crandn
from ofdm_dstc.dstbc import builtin_code, derive_relay_schedule
from ofdm_dstc.transceiver import equivalent_channel, run_frames

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

BUILTINS = ["alamouti", "example1_r5", "fourgroup_r4", "clustered_alamouti_r4"]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_delays(rng, n_draws, R, tau_max):
    """Sorted delays on ``{0..tau_max}`` with ``tau[0] = 0`` and the last
    relay at ``tau_max`` so the boundary is always exercised."""
    tau = np.sort(rng.integers(0, tau_max + 1, size=(n_draws, R)), axis=-1)
    tau[:, 0] = 0
    tau[:, -1] = tau_max
    return tau


def noiseless_model_error(code_name, rng, n_draws, tau_max, n=64, l_cp=16, P=10.0,
                          tau=None):
    """Largest per-subcarrier gap between the waveform and ``scale * X(s) h``."""
    code = builtin_code(code_name)
    sched = derive_relay_schedule(code)
    cfg = PowerConfig.default(P, code.R)
    s = crandn(rng, (n_draws, n, code.K))
    f = crandn(rng, (n_draws, code.R))
    g = crandn(rng, (n_draws, code.R))
    if tau is None:
        tau = random_delays(rng, n_draws, code.R, tau_max)
    y = run_frames(s, sched, cfg, l_cp, f, g, tau, rng, 0.0, 0.0)
    h = equivalent_channel(code, f, g, tau, n)
    model = cfg.signal_scale * np.einsum("...tj,...j->...t", code.codeword(s), h)
    return float(np.max(np.linalg.norm(y - model, axis=-1)))
