"""Command-line tool: run, verify, sweep-buffers, sweep-clock, dump-trace.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .harness import (ConfigError, RunConfig, VerificationFailed, parse_config_file,
                      run_job, sweep, verify_campaign)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--n", type=int, help="transform size (power of two)")
    p.add_argument("--q", type=int, help="modulus (odd prime; default picked per n)")
    p.add_argument("--nb", type=int, help="number of atom buffers incl. primary")
    p.add_argument("--clock-mhz", type=int, help="operating clock in MHz")
    p.add_argument("--seed", type=int, help="input generator seed")
    p.add_argument("--csv", metavar="PATH", help="write stats rows as CSV")
    p.add_argument("--trace", metavar="PATH", help="write the timed command trace")


def _build_config(args) -> RunConfig:
    cfg = parse_config_file(args.config) if args.config else RunConfig()
    if args.n is not None:
        cfg.n = args.n
    if args.q is not None:
        cfg.q = args.q
    if args.nb is not None:
        cfg.nb = args.nb
    if args.clock_mhz is not None:
        cfg.clock_mhz = args.clock_mhz
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.csv_path = args.csv
    cfg.trace_path = args.trace
    return cfg


def _write(path: str | None, text: str) -> None:
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _single_row_csv(cfg: RunConfig, stats) -> str:
    rep = harness.Report(header=[f"prng={harness.PRNG_ID}",
                                 f"run n={cfg.n} q={cfg.resolved_q()} nb={cfg.nb} "
                                 f"clock={cfg.clock_mhz} seed={cfg.seed}"])
    rep.rows.append(harness._stats_row(cfg, cfg.resolved_q(), stats))
    return rep.csv()


def cmd_run(args) -> int:
    cfg = _build_config(args)
    res = run_job(cfg)
    st = res.stats
    print(f"n={cfg.n} q={cfg.resolved_q()} nb={cfg.nb} clock_mhz={cfg.clock_mhz} "
          f"seed={cfg.seed} cycles={st.cycles} ns={st.ns:.3f} act={st.act} "
          f"rd={st.rd} wr={st.wr} c1={st.c1} c2={st.c2} "
          f"energy_nj={st.energy_nj:.3f} verified=ok")
    if args.csv:
        _write(args.csv, _single_row_csv(cfg, st))
    if args.trace:
        _write(args.trace, res.trace.dump())
    if args.dump_image:
        _write(args.dump_image, "\n".join(str(v) for v in res.image) + "\n")
    return 0


def cmd_verify(args) -> int:
    cfg = _build_config(args)
    sizes = [cfg.n] if args.n is not None else list(harness.DEFAULT_SIZES)
    base_seed = cfg.seed
    seeds = [base_seed] if args.seed is not None else list(range(10))
    rep = verify_campaign(sizes=sizes, seeds=seeds, base=cfg)
    if args.csv:
        _write(args.csv, rep.csv())
    if rep.passed:
        print(f"verify: PASS ({len(rep.rows)} runs, sizes={sizes}, seeds={seeds})")
        return 0
    for f in rep.failures:
        print(f"verify: FAIL {f}", file=sys.stderr)
    return 1


def _cmd_sweep(args, dimension: str) -> int:
    cfg = _build_config(args)
    rep = sweep(dimension, cfg)
    text = rep.csv()
    if args.csv:
        _write(args.csv, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_dump_trace(args) -> int:
    cfg = _build_config(args)
    _write(args.trace, harness.dump_trace_text(cfg))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dramntt",
        description="Cycle-level simulator and command mapper for an in-bank "
                    "DRAM number-theoretic-transform accelerator.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for name, fn in (("run", cmd_run), ("verify", cmd_verify),
                     ("sweep-buffers", lambda a: _cmd_sweep(a, "buffers")),
                     ("sweep-clock", lambda a: _cmd_sweep(a, "clock")),
                     ("dump-trace", cmd_dump_trace)):
        p = sub.add_parser(name)
        _add_common(p)
        if name == "run":
            p.add_argument("--dump-image", metavar="PATH",
                           help="write the final bank image, one word per line")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except VerificationFailed as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
