#!/usr/bin/env python3
"""
Security analysis and simulation of the polarization bit string commitment.

Usage:
    python qbsc.py table                                  # rs1=0.5, mu=0.75, M=2..12
    python qbsc.py table --rs1 0.1 --m-max 5 --format csv
    python qbsc.py validate --m 2 --trials 10000000 --seed 1
    python qbsc.py session --m 4 --choice 2 --strategy neighbor_cheat --out transcript.jsonl
    python qbsc.py sweep --parameter rs1 --values 0.1,0.3,0.5 --m 4
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

from src.config import Settings, load_settings
from src.exceptions import ConfigError, QBSCError
from src.messages import format_transcript, write_transcript
from src.photon_sim import SimConfig
from src.polarization import ProtocolParams, choice_from_bits
from src.protocol import AliceStrategy, VerifierPolicy, run_session
from src.report import OutputFormat, render_security, render_validation
from src.security_metrics import MAX_M, max_secure_M, security_report, security_table
from src.utils import configure_logging, ensure_parent_directory
from src.validation import MIN_TRIALS, ValidationPipeline

logger = logging.getLogger("qbsc")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

RANGE_TOLERANCE = 1e-9


class UsageError(Exception):
    """Invalid combination of command-line arguments."""


def parse_strategy(text: str) -> AliceStrategy:
    try:
        return AliceStrategy.parse(text)
    except QBSCError as e:
        raise argparse.ArgumentTypeError(str(e))


def parse_sweep_values(values: Optional[str], range_spec: Optional[str], integer: bool) -> List[float]:
    """
    Turn --values "a,b,c" or --range "start:stop:step" into a list.

    Raises:
        UsageError: On malformed or empty specifications
    """
    if bool(values) == bool(range_spec):
        raise UsageError("give exactly one of --values or --range")
    cast = int if integer else float
    try:
        if values:
            result = [cast(v) for v in values.split(",") if v.strip()]
        else:
            start, stop, step = (float(p) for p in range_spec.split(":"))
            if step <= 0:
                raise UsageError("range step must be positive")
            count = math.floor((stop - start) / step + RANGE_TOLERANCE) + 1
            result = [cast(round(start + i * step, 12)) for i in range(max(count, 0))]
    except ValueError as e:
        raise UsageError(f"invalid sweep specification: {e}")
    if not result:
        raise UsageError("sweep range is empty")
    return result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Bit string commitment with polarization of mesoscopic coherent states",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python qbsc.py table
  python qbsc.py table --rs1 0.1 --m-max 5 --format csv
  python qbsc.py validate --m 2 --trials 10000000 --seed 1
  python qbsc.py session --m 2 --strategy neighbor_cheat --seed 7 --out t.jsonl
  python qbsc.py sweep --parameter rs1 --values 0.1,0.3,0.5 --m 4
        """,
    )
    parser.add_argument("--config", type=Path, help="YAML settings file (default: config/default.yaml)")
    parser.add_argument("--verbose", action="store_true", help="Verbose logging")
    parser.add_argument("--log-file", help="Also write logs to this file")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rs1", type=float, help="Neighbor overlap r_s1 in (0, 1)")
    common.add_argument("--mu", type=float, help="Main detector efficiency in (0, 1]")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], default="table",
                        help="Output format (default: table)")
    common.add_argument("--out", type=Path, help="Write output to this file instead of stdout")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--seed", type=int, help="64-bit seed (fallback: QBSC_SEED, then config)")
    sim.add_argument("--workers", type=int, help="Worker threads")

    sub = parser.add_subparsers(dest="command", required=True)

    table = sub.add_parser("table", parents=[common], help="Security table over a range of M")
    table.add_argument("--m", type=int, help="Single value of M")
    table.add_argument("--m-min", type=int, help="Smallest M")
    table.add_argument("--m-max", type=int, help="Largest M")
    table.add_argument("--max-secure", action="store_true",
                       help="Append the largest QCM-secure M (text format)")

    validate = sub.add_parser("validate", parents=[common, sim],
                              help="Monte Carlo check of the closed forms")
    validate.add_argument("--m", type=int, default=2, help="Number of states (default: 2)")
    validate.add_argument("--trials", type=int, help=f"Trials per quantity (>= {MIN_TRIALS})")
    validate.add_argument("--choice", type=int, default=0, help="State used for honest sessions")

    session = sub.add_parser("session", parents=[common, sim], help="Run one commit/reveal session")
    session.add_argument("--m", type=int, default=2, help="Number of states (default: 2)")
    group = session.add_mutually_exclusive_group()
    group.add_argument("--choice", type=int, help="Index of the committed state (default: 0)")
    group.add_argument("--bits", help="Committed bit string (floor(log2 M) bits)")
    session.add_argument("--strategy", type=parse_strategy, default=AliceStrategy(),
                         help="honest | neighbor_cheat | underpower:<factor>")
    session.add_argument("--dark-count", type=float, help="Detector dark count probability")
    session.add_argument("--power-check", action="store_true",
                         help="Bob rejects underpowered pulses before measuring")
    session.add_argument("--bob-attack", action="store_true",
                         help="Bob runs the brute-force attack before the reveal")

    sweep = sub.add_parser("sweep", parents=[common], help="Security metrics across a parameter range")
    sweep.add_argument("--parameter", required=True, choices=["rs1", "mu", "M"], help="Swept parameter")
    sweep.add_argument("--values", help="Comma-separated values")
    sweep.add_argument("--range", dest="range_spec", help="start:stop:step (stop inclusive)")
    sweep.add_argument("--m", type=int, help="Fixed M when sweeping rs1 or mu")

    return parser


def emit(text: str, out: Optional[Path]) -> None:
    if out:
        ensure_parent_directory(out).write_text(text)
        logger.info(f"Wrote report to {out}")
    else:
        sys.stdout.write(text)


def protocol_params(M: int, rs1: float, mu: float) -> ProtocolParams:
    """Build ProtocolParams for a command, keeping M within the supported range."""
    if not 2 <= M <= MAX_M:
        raise UsageError(f"M must lie in [2, {MAX_M}], got {M}")
    return ProtocolParams.uniform(M, rs1, mu)


def sim_config(args, settings: Settings, trials: int) -> SimConfig:
    seed = args.seed if args.seed is not None else settings.seed
    workers = args.workers if args.workers is not None else settings.workers
    return SimConfig(trials=trials, seed=seed, workers=workers, chunk_trials=settings.chunk_trials)


def cmd_table(args, settings: Settings) -> int:
    rs1 = settings.rs1 if args.rs1 is None else args.rs1
    mu = settings.mu if args.mu is None else args.mu
    if args.m is not None:
        m_min = m_max = args.m
    else:
        m_min = settings.m_min if args.m_min is None else args.m_min
        m_max = settings.m_max if args.m_max is None else args.m_max
    if not 2 <= m_min <= m_max <= MAX_M:
        raise UsageError(f"need 2 <= m-min <= m-max <= {MAX_M}, got {m_min}..{m_max}")

    reports = security_table(rs1, mu, range(m_min, m_max + 1))
    largest = max_secure_M(rs1, mu) if args.max_secure else None
    emit(render_security(reports, OutputFormat(args.format), max_secure=largest), args.out)
    return EXIT_OK


def cmd_validate(args, settings: Settings) -> int:
    trials = settings.trials if args.trials is None else args.trials
    if trials < MIN_TRIALS:
        raise UsageError(f"--trials must be at least {MIN_TRIALS}, got {trials}")
    params = protocol_params(
        args.m,
        settings.rs1 if args.rs1 is None else args.rs1,
        settings.mu if args.mu is None else args.mu,
    )
    pipeline = ValidationPipeline(
        params,
        sim_config(args, settings, trials),
        choice=args.choice,
        dark_count_prob=settings.dark_count_prob,
    )
    report = pipeline.run()
    emit(render_validation(report, OutputFormat(args.format)), args.out)
    return EXIT_OK if report.all_passed else EXIT_FAILURE


def cmd_session(args, settings: Settings) -> int:
    params = protocol_params(
        args.m,
        settings.rs1 if args.rs1 is None else args.rs1,
        settings.mu if args.mu is None else args.mu,
    )
    choice = choice_from_bits(args.bits, params.M) if args.bits is not None else (args.choice or 0)
    policy = VerifierPolicy(
        dark_count_prob=settings.dark_count_prob if args.dark_count is None else args.dark_count,
        spd_efficiency=settings.spd_efficiency,
        power_check=args.power_check,
    )
    result = run_session(params, args.strategy, choice, sim_config(args, settings, 1), policy, args.bob_attack)

    if args.out:
        write_transcript(result.transcript, args.out)
    else:
        sys.stdout.write(format_transcript(result.transcript))
    if result.bob_guess is not None:
        logger.info(f"Bob's brute-force guess: {result.bob_guess}")
    logger.info(f"Verdict: {result.reason.name}")
    return EXIT_OK if result.confirmed else EXIT_FAILURE


def cmd_sweep(args, settings: Settings) -> int:
    values = parse_sweep_values(args.values, args.range_spec, integer=args.parameter == "M")
    rs1 = settings.rs1 if args.rs1 is None else args.rs1
    mu = settings.mu if args.mu is None else args.mu
    if args.parameter != "M" and args.m is None:
        raise UsageError(f"--m is required when sweeping {args.parameter}")

    reports = []
    for value in values:
        if args.parameter == "rs1":
            params = protocol_params(args.m, value, mu)
        elif args.parameter == "mu":
            params = protocol_params(args.m, rs1, value)
        else:
            params = protocol_params(value, rs1, mu)
        reports.append(security_report(params))

    emit(render_security(reports, OutputFormat(args.format), sweep=True), args.out)
    return EXIT_OK


COMMANDS = {
    "table": cmd_table,
    "validate": cmd_validate,
    "session": cmd_session,
    "sweep": cmd_sweep,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.log_file)

    try:
        settings = load_settings(args.config)
        return COMMANDS[args.command](args, settings)
    except (UsageError, ConfigError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except QBSCError as e:
        logger.error(f"Invalid parameters: {e}")
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"Command failed: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
