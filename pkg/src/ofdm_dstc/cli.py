"""Command line interface: ``ofdm-dstc <subcommand>``.

Exit status is 0 on success, 1 when a checked property fails and 2 on
invalid input.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .dstbc import (
    ConjugateLinearCode,
    ScheduleError,
    builtin_code,
    check_full_rank,
    check_row_conditions,
    derive_relay_schedule,
    row_partitions,
    validate_code,
)
from .sim import (
    ConfigError,
    EstimationError,
    ExperimentConfig,
    compare_gap,
    default_signal_set,
    estimate_diversity,
    load_sweep,
    run_sweep,
)

OUTPUT_DIR_ENV = "OFDM_DSTC_OUTPUT_DIR"

# (flag, config field, argparse kwargs)
_SWEEP_FLAGS = [
    ("--scheme", "scheme", {"choices": ["coherent", "differential", "clustered_baseline"]}),
    ("--code", "code", {}),
    ("--R", "R", {"type": int}),
    ("--N", "N", {"type": int}),
    ("--l-cp", "l_cp", {"type": int}),
    ("--tau-max", "tau_max", {"type": int}),
    ("--snr-db", "snr_db", {"type": float, "nargs": "+"}),
    ("--max-trials", "max_trials", {"type": int}),
    ("--target-errors", "target_errors", {"type": int}),
    ("--seed", "master_seed", {"type": int}),
    ("--pi1", "pi1", {"type": float}),
    ("--pi2", "pi2", {"type": float}),
    ("--diff-frames", "diff_frames", {"type": int}),
    ("--chunk", "chunk", {"type": int}),
    ("--workers", "workers", {"type": int}),
    ("--output", "output", {}),
]


def _load_code(spec):
    path = Path(spec)
    if path.suffix == ".json" and path.exists():
        return ConjugateLinearCode.from_json(path.read_text())
    return builtin_code(spec)


def _config_from_args(args):
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    for _, name, _ in _SWEEP_FLAGS:
        v = getattr(args, name)
        if v is not None:
            base[name] = v
    if args.full_ml:
        base["grouped"] = False
    if args.allow_cp_violation:
        base["allow_cp_violation"] = True
    cfg = ExperimentConfig.from_dict(base)
    if cfg.output is None:
        out_dir = Path(os.environ.get(OUTPUT_DIR_ENV, "results"))
        cfg.output = str(out_dir / f"{cfg.scheme}_{cfg.code}_seed{cfg.master_seed}.csv")
    return cfg


def cmd_sweep(args):
    cfg = _config_from_args(args)
    cfg.validate()

    def report(p):
        print(f"{p.snr_db:6.2f} dB  trials={p.trials:7d}  bit_errors={p.bit_errors:7d}"
              f"  ber={p.ber:.3e}  bler={p.bler:.3e}  ({p.wall_time:.1f}s)", flush=True)

    res = run_sweep(cfg, progress=None if args.quiet else report)
    print(f"wrote {cfg.output} and {Path(cfg.output).with_suffix('.json')}")
    return 0 if res.points else 1


def cmd_diversity(args):
    res = load_sweep(args.result)
    d = estimate_diversity(res, args.window, args.min_errors)
    print(f"{d:.4f}")
    return 0


def cmd_gap(args):
    gap = compare_gap(load_sweep(args.a), load_sweep(args.b), args.target_ber)
    print(f"{gap:.4f}")
    return 0


def cmd_validate_code(args):
    code = _load_code(args.code)
    problems = validate_code(code)
    rows = check_row_conditions(row_partitions(code))
    ok = not problems and rows.schedulable
    for msg in problems:
        print(f"FAIL structure: {msg}")
    for label, msgs, hard in [("disjoint", rows.disjoint, True),
                              ("balanced", rows.balanced, False),
                              ("nested", rows.nested, True)]:
        tag = "FAIL" if hard else "WARN"
        for msg in msgs:
            print(f"{tag} {label}: {msg}")
    if args.rank:
        rep = check_full_rank(code, default_signal_set(code))
        expected = args.expect_rank or code.R
        print(f"min rank {rep.min_rank} of {code.R} over {rep.pairs_checked} pairs"
              f"{'' if rep.exhaustive else ' (sampled)'}")
        if rep.min_rank < expected:
            ok = False
            print(f"FAIL rank: expected at least {expected}")
    print(f"{code.name or args.code}: {'ok' if ok else 'invalid'}")
    return 0 if ok else 1


def cmd_derive_schedule(args):
    code = _load_code(args.code)
    sched = derive_relay_schedule(code)
    if args.json:
        print(json.dumps(sched.to_dict(), indent=2))
    else:
        print(sched.table())
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="ofdm-dstc",
        description="Distributed space-time codes over asynchronous OFDM relays.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="Monte Carlo BER/BLER sweep over SNR")
    s.add_argument("--config", help="JSON file with ExperimentConfig fields")
    for flag, name, kw in _SWEEP_FLAGS:
        s.add_argument(flag, dest=name, default=None, **kw)
    s.add_argument("--full-ml", action="store_true", help="disable group decoding")
    s.add_argument("--allow-cp-violation", action="store_true",
                   help="permit tau_max > l_cp (negative tests)")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("diversity", help="diversity slope of a saved sweep")
    d.add_argument("result", help="sweep CSV or JSON sidecar")
    d.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    d.add_argument("--min-errors", type=int, default=1)
    d.set_defaults(func=cmd_diversity)

    g = sub.add_parser("gap", help="SNR gap of sweep B relative to sweep A")
    g.add_argument("a")
    g.add_argument("b")
    g.add_argument("--target-ber", type=float, default=1e-3)
    g.set_defaults(func=cmd_gap)

    v = sub.add_parser("validate-code", help="structural, row-condition and rank checks")
    v.add_argument("code", help="builtin code id or JSON file")
    v.add_argument("--rank", action="store_true", help="also run the rank check")
    v.add_argument("--expect-rank", type=int, help="required min rank (default R)")
    v.set_defaults(func=cmd_validate_code)

    r = sub.add_parser("derive-schedule", help="print the relay transmission table")
    r.add_argument("code", help="builtin code id or JSON file")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_derive_schedule)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EstimationError, ScheduleError, KeyError, ValueError,
            OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
