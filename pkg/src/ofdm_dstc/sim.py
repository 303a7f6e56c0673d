"""Seeded Monte Carlo BER sweeps.

Frames are simulated in fixed-size chunks. Chunk ``c`` of SNR point ``j``
draws everything from ``SeedSequence([master_seed, j, c])``, and chunk
results are accumulated in chunk order, so the outcome does not depend on
how many worker processes run the chunks.
"""

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .channel import PowerConfig, crandn, snr_db_to_power
from .constellation import per_symbol_qpsk, precoded_rotated_qpsk, to_complex
from .decoder import decode_frames
from .differential import build_fourgroup_diff_r4, diff_decode_frames, diff_encode
from .dstbc import builtin_code, derive_relay_schedule
from .ofdm import is_power_of_two
from .transceiver import equivalent_channel, noise_covariance, run_frames

__all__ = [
    "ConfigError",
    "EstimationError",
    "ExperimentConfig",
    "PointResult",
    "SweepResult",
    "run_sweep",
    "estimate_diversity",
    "compare_gap",
    "load_sweep",
    "default_signal_set",
]

SCHEMES = ("coherent", "differential", "clustered_baseline")


class ConfigError(ValueError):
    """Experiment configuration is invalid."""


class EstimationError(ValueError):
    """Not enough usable points for a slope or gap estimate."""


@dataclass
class ExperimentConfig:
    """One BER sweep.

    ``snr_db`` entries may be ``inf`` for a noiseless point. ``pi2=None``
    means ``1/(2R)``. A trial is one channel realization: one frame for the
    coherent schemes, a reference frame plus ``diff_frames`` data frames for
    the differential scheme.
    """

    scheme: str = "coherent"
    code: str = None
    R: int = 4
    N: int = 64
    l_cp: int = 16
    tau_max: int = 15
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    max_trials: int = 2000
    target_errors: int = 200
    master_seed: int = 0
    pi1: float = 0.5
    pi2: float = None
    diff_frames: int = 1
    chunk: int = 16
    workers: int = 1
    grouped: bool = True
    allow_cp_violation: bool = False
    output: str = None

    def __post_init__(self):
        self.snr_db = tuple(float(s) for s in np.atleast_1d(self.snr_db))
        if self.code is None:
            self.code = {"coherent": "fourgroup_r4",
                         "differential": "fourgroup_r4",
                         "clustered_baseline": f"clustered_alamouti_r{self.R}"
                         }.get(self.scheme)

    def problems(self):
        out = []
        if self.scheme not in SCHEMES:
            out.append(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not is_power_of_two(self.N):
            out.append(f"N={self.N} is not a power of two >= 2")
        if not 0 <= self.l_cp <= self.N:
            out.append(f"l_cp={self.l_cp} outside [0, N]")
        if self.tau_max < 0:
            out.append("tau_max must be nonnegative")
        if self.tau_max > self.l_cp and not self.allow_cp_violation:
            out.append(f"tau_max={self.tau_max} exceeds l_cp={self.l_cp}")
        if self.max_trials <= 0:
            out.append("max_trials must be positive")
        if self.target_errors <= 0:
            out.append("target_errors must be positive")
        if self.chunk <= 0 or self.workers <= 0 or self.diff_frames <= 0:
            out.append("chunk, workers and diff_frames must be positive")
        if not self.snr_db:
            out.append("snr grid is empty")
        if self.pi1 <= 0 or (self.pi2 is not None and self.pi2 <= 0):
            out.append("power fractions must be positive")
        if self.code is None:
            out.append("no code given")
            return out
        try:
            code = builtin_code(self.code)
        except (KeyError, ValueError) as exc:
            out.append(exc.args[0] if exc.args else str(exc))
        else:
            if code.R != self.R:
                out.append(f"code {self.code} has R={code.R}, config says R={self.R}")
            if self.scheme == "differential" and self.code != "fourgroup_r4":
                out.append("differential scheme is available for fourgroup_r4 only")
        return out

    def validate(self):
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def power(self, P):
        pi2 = self.pi2 if self.pi2 is not None else 0.5 / self.R
        return PowerConfig(P=P, pi1=self.pi1, pi2=pi2)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class PointResult:
    snr_db: float
    trials: int
    bits: int
    bit_errors: int
    blocks: int
    block_errors: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ber(self):
        return self.bit_errors / self.bits if self.bits else float("nan")

    @property
    def bler(self):
        return self.block_errors / self.blocks if self.blocks else float("nan")


@dataclass
class SweepResult:
    """Per-SNR counts plus the config and run metadata.

    Equality ignores wall time and ``run_info`` (worker count, output path),
    which do not affect the counts.
    """

    config: dict
    points: list
    metadata: dict = field(default_factory=dict)
    run_info: dict = field(default_factory=dict, compare=False)

    @property
    def snr_db(self):
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self):
        return np.array([p.ber for p in self.points])

    @property
    def bler(self):
        return np.array([p.bler for p in self.points])

    @property
    def bit_errors(self):
        return np.array([p.bit_errors for p in self.points])

    def to_csv(self, path):
        path = Path(path)
        lines = ["snr_db,trials,bit_errors,ber,bler"]
        for p in self.points:
            lines.append(f"{p.snr_db:g},{p.trials},{p.bit_errors},{p.ber:.6e},{p.bler:.6e}")
        path.write_text("\n".join(lines) + "\n")
        return path

    def to_dict(self):
        return {"config": self.config, "metadata": self.metadata,
                "run_info": self.run_info,
                "points": [asdict(p) for p in self.points]}

    def save(self, path):
        """Write ``path`` (CSV) and a JSON sidecar with the same stem."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_csv(path)
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.to_dict(), indent=2, default=_jsonable))
        return path, side

    @classmethod
    def from_dict(cls, d):
        return cls(d["config"], [PointResult(**p) for p in d["points"]],
                   d.get("metadata", {}), d.get("run_info", {}))


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x)}")


def load_sweep(path):
    """Load a sweep from its JSON sidecar, or from a bare CSV.

    A CSV alone carries no bit counts; they are reconstructed as
    ``bit_errors / ber`` where possible.
    """
    path = Path(path)
    side = path if path.suffix == ".json" else path.with_suffix(".json")
    if side.exists():
        return SweepResult.from_dict(json.loads(side.read_text()))
    import csv
    points = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            errs, ber = int(row["bit_errors"]), float(row["ber"])
            bits = int(round(errs / ber)) if ber > 0 else 0
            points.append(PointResult(float(row["snr_db"]), int(row["trials"]),
                                      bits, errs, 0, 0))
    return SweepResult({}, points, {"source": str(path)})


# --------------------------------------------------------------------------
# simulation


@lru_cache(maxsize=8)
def _setup(cfg_json):
    cfg = ExperimentConfig.from_dict(json.loads(cfg_json))
    code = builtin_code(cfg.code)
    schedule = derive_relay_schedule(code)
    if cfg.scheme == "differential":
        book = build_fourgroup_diff_r4()
        ss = book.signal_set
    else:
        book, ss = None, default_signal_set(code)
    return cfg, code, schedule, book, ss


def default_signal_set(code):
    """Coherent signal set used for ``code``: precoded rotated QPSK for the
    four-group code, per-symbol QPSK otherwise."""
    if code.name == "fourgroup_r4":
        return precoded_rotated_qpsk()
    return per_symbol_qpsk(code.K)


def _draw_channels(rng, n, R, tau_max):
    f = crandn(rng, (n, R))
    g = crandn(rng, (n, R))
    tau = np.zeros((n, R), dtype=int)
    tau[:, 1:] = np.sort(rng.integers(0, tau_max + 1, size=(n, R - 1)), axis=-1)
    return f, g, tau


def _noise_levels(snr_db):
    if math.isinf(snr_db) and snr_db > 0:
        return 1.0, 0.0
    return float(snr_db_to_power(snr_db)), 1.0


def simulate_chunk(cfg_json, point, chunk):
    """Simulate one chunk; returns (trials, bits, bit_errors, blocks, block_errors)."""
    cfg, code, schedule, book, ss = _setup(cfg_json)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, point, chunk]))
    n_trials = min(cfg.chunk, cfg.max_trials - chunk * cfg.chunk)
    P, noise = _noise_levels(cfg.snr_db[point])
    pcfg = cfg.power(P)
    N, G = cfg.N, len(ss.groups)
    f, g, tau = _draw_channels(rng, n_trials, code.R, cfg.tau_max)
    if cfg.scheme == "differential":
        D = cfg.diff_frames
        sent = rng.integers(0, ss.sizes, size=(n_trials, N, D, G))
        s = diff_encode(ss.flat_index(sent), book)          # (F, N, D+1, R)
        symbols = np.moveaxis(s, 2, 1)                      # (F, D+1, N, R)
        y = run_frames(symbols, schedule, pcfg, cfg.l_cp, f[:, None], g[:, None],
                       tau[:, None], rng, noise, noise)     # (F, D+1, N, T)
        got = ss.indices[diff_decode_frames(np.moveaxis(y, 1, 2), book, cfg.grouped)]
    else:
        sent = rng.integers(0, ss.sizes, size=(n_trials, N, G))
        symbols = to_complex(ss.real_from_indices(sent), ss.K)
        y = run_frames(symbols, schedule, pcfg, cfg.l_cp, f, g, tau, rng, noise, noise)
        h = equivalent_channel(code, f, g, tau, N)
        omega = noise_covariance(schedule, g, pcfg, N)
        got = decode_frames(y, code, ss, h, omega, pcfg.signal_scale, cfg.grouped)
    bit_err = int(np.sum(ss.bits_from_indices(sent) != ss.bits_from_indices(got)))
    blk_err = int(np.sum(np.any(sent != got, axis=-1)))
    blocks = int(np.prod(sent.shape[:-1]))
    return n_trials, blocks * ss.bits_per_codeword, bit_err, blocks, blk_err


def _code_hash(code):
    return hashlib.sha256(code.to_json(sort_keys=True).encode()).hexdigest()[:16]


def run_sweep(cfg, progress=None):
    """Run every SNR point of ``cfg`` and return a :class:`SweepResult`.

    Each point stops after the chunk in which ``target_errors`` bit errors
    or ``max_trials`` trials are reached.
    """
    cfg.validate()
    cfg_json = json.dumps(cfg.to_dict(), sort_keys=True)
    _, code, schedule, _, ss = _setup(cfg_json)
    n_chunks = -(-cfg.max_trials // cfg.chunk)
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    points = []
    try:
        for j, snr in enumerate(cfg.snr_db):
            t0 = time.perf_counter()
            acc = np.zeros(5, dtype=np.int64)
            c = 0
            while c < n_chunks:
                wave = range(c, min(c + max(cfg.workers, 1) * 2, n_chunks))
                if pool is None:
                    results = (simulate_chunk(cfg_json, j, k) for k in wave)
                else:
                    results = pool.map(simulate_chunk, [cfg_json] * len(wave),
                                       [j] * len(wave), list(wave))
                done = False
                for r in results:
                    acc += r
                    c += 1
                    if acc[2] >= cfg.target_errors or acc[0] >= cfg.max_trials:
                        done = True
                        break
                if done:
                    break
            trials, bits, berr, blocks, blerr = (int(v) for v in acc)
            points.append(PointResult(snr, trials, bits, berr, blocks, blerr,
                                      time.perf_counter() - t0))
            if progress:
                progress(points[-1])
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    meta = {
        "package_version": __version__,
        "code_hash": _code_hash(code),
        "code": code.to_dict(),
        "schedule": schedule.to_dict(),
        "signal_set": ss.name,
        "rotation_deg": ss.rotation_deg,
        "bits_per_codeword": ss.bits_per_codeword,
    }
    echo = json.loads(cfg_json)
    run_info = {k: echo.pop(k) for k in ("workers", "output")}
    result = SweepResult(echo, points, meta, run_info)
    if cfg.output:
        result.save(cfg.output)
    return result


# --------------------------------------------------------------------------
# post-processing


def estimate_diversity(result, window=None, min_errors=1):
    """Negative least-squares slope of ``log10 BER`` against ``SNR_dB / 10``.

    Only points inside ``window=(lo, hi)`` (dB, inclusive) with at least
    ``min_errors`` bit errors are used.

    Raises
    ------
    EstimationError
        With fewer than three usable points.
    """
    snr, ber = result.snr_db, result.ber
    errs = result.bit_errors
    keep = np.isfinite(snr) & (ber > 0) & (errs >= min_errors)
    if window is not None:
        keep &= (snr >= window[0]) & (snr <= window[1])
    if keep.sum() < 3:
        raise EstimationError(
            f"need at least 3 points with errors in the window, have {keep.sum()}")
    slope = np.polyfit(snr[keep] / 10.0, np.log10(ber[keep]), 1)[0]
    return float(-slope)


def _snr_at(result, target):
    snr, ber = result.snr_db, result.ber
    ok = np.isfinite(snr) & (ber > 0)
    snr, lb = snr[ok], np.log10(ber[ok])
    lt = np.log10(target)
    for i in range(len(snr) - 1):
        a, b = lb[i], lb[i + 1]
        if (a - lt) * (b - lt) <= 0 and a != b:
            return float(snr[i] + (lt - a) * (snr[i + 1] - snr[i]) / (b - a))
        if a == b == lt:
            return float(snr[i])
    raise EstimationError(f"curve does not cross BER {target:g}")


def compare_gap(result_a, result_b, target_ber):
    """SNR (dB) that curve b needs beyond curve a to reach ``target_ber``.

    Each curve is interpolated linearly in (SNR_dB, log10 BER) between the
    two points bracketing the target.
    """
    return _snr_at(result_b, target_ber) - _snr_at(result_a, target_ber)
