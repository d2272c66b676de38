"""Command-line interface for EMF-constrained power-control campaigns."""

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from campaign import ResultTable, campaign_fingerprint, run_campaign, summarize_min_rates
from cdf_export import METRIC_COLUMNS, emit_cdf
from checkpoint_manager import CheckpointManager
from config import CHECKPOINT_DIR, DEFAULT_OUT_DIR, MAX_WORKERS, RESULTS_FILENAME
from config_loader import load_config
from logger import LogManager
from models import CampaignSpec


def _comma_list(value: str) -> List[str]:
    return [item.strip() for item in value.split(',') if item.strip()]


def parse_args(args: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse command line arguments.

    Args:
        args: Optional list of command line arguments

    Returns:
        Parsed arguments
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--out-dir',
        type=Path,
        default=DEFAULT_OUT_DIR,
        help='Directory for result files'
    )
    common.add_argument(
        '-v', '--verbose',
        action='store_true',
        help='Log solver traces (DEBUG level)'
    )

    campaign = argparse.ArgumentParser(add_help=False)
    campaign.add_argument(
        'config',
        type=Path,
        nargs='?',
        help='Campaign configuration file (defaults if omitted)'
    )
    campaign.add_argument('--seed', type=int, help='Override master_seed')
    campaign.add_argument('--drops', type=int, help='Override num_drops')
    campaign.add_argument(
        '--threads',
        type=int,
        default=MAX_WORKERS,
        help='Worker threads (one drop per task)'
    )
    campaign.add_argument(
        '--resume',
        action='store_true',
        help='Reuse per-drop checkpoints of an identical campaign'
    )

    parser = argparse.ArgumentParser(
        description="Max-min power control for cell-free massive MIMO under EMF limits"
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    subparsers.add_parser(
        'run', parents=[common, campaign], help='Run a campaign and write the result CSV'
    )

    sweep = subparsers.add_parser(
        'sweep', parents=[common, campaign], help='Run a campaign over parameter grids'
    )
    sweep.add_argument(
        '--users',
        type=lambda value: [int(item) for item in _comma_list(value)],
        help='User counts, e.g. 10,20,30,40'
    )
    sweep.add_argument(
        '--sar-caps',
        type=lambda value: [float(item) for item in _comma_list(value)],
        help='SAR caps in W/kg, e.g. 0.08,0.008,0.0008'
    )

    cdf = subparsers.add_parser('cdf', parents=[common], help='Export per-user CDFs')
    cdf.add_argument('table', type=Path, help='Result CSV')
    cdf.add_argument(
        '--metric',
        choices=sorted(METRIC_COLUMNS),
        default='rate',
        help='Metric to export'
    )
    cdf.add_argument(
        '--group-by',
        type=_comma_list,
        default=['scheme', 'deployment'],
        help='Comma-separated grouping columns'
    )

    summary = subparsers.add_parser(
        'summary', parents=[common], help='Mean and median min-rate per scheme'
    )
    summary.add_argument('table', type=Path, help='Result CSV')

    return parser.parse_args(args)


def build_spec(parsed_args: argparse.Namespace) -> CampaignSpec:
    """
    Load the configuration and apply command-line overrides.

    Raises:
        ValueError: If a sweep is requested without any grid
    """
    spec = load_config(parsed_args.config)
    overrides = {}
    if parsed_args.seed is not None:
        overrides['master_seed'] = parsed_args.seed
    if parsed_args.drops is not None:
        overrides['num_drops'] = parsed_args.drops

    if parsed_args.command == 'sweep':
        sweeps = dict(spec.sweeps)
        if parsed_args.users:
            sweeps['num_users'] = parsed_args.users
        if parsed_args.sar_caps:
            sweeps['sar_cap'] = parsed_args.sar_caps
        if not sweeps:
            raise ValueError(
                "No sweep grid given; set sweep_num_users / sweep_sar_cap_w_kg "
                "or pass --users / --sar-caps"
            )
        overrides['sweeps'] = sweeps

    return replace(spec, **overrides) if overrides else spec


def run(parsed_args: argparse.Namespace) -> Path:
    """Run a campaign and write its result table."""
    manager = LogManager()
    logger = manager.get_logger("cli")
    manager.archive_logs()
    spec = build_spec(parsed_args)

    checkpoints = None
    if parsed_args.resume:
        checkpoints = CheckpointManager(CHECKPOINT_DIR, campaign_fingerprint(spec))

    table = run_campaign(spec, max_workers=parsed_args.threads, checkpoints=checkpoints)
    output = table.to_csv(parsed_args.out_dir / RESULTS_FILENAME)
    logger.info(f"Wrote {len(table)} rows to {output}")
    return output


def summary(parsed_args: argparse.Namespace) -> None:
    """Print mean and median min-rate per deployment, direction and scheme."""
    table = ResultTable.from_csv(parsed_args.table)
    per_drop = summarize_min_rates(table)
    stats = (
        per_drop.groupby(['sweep_k', 'sweep_e', 'deployment', 'direction', 'scheme'])
        ['min_rate_bps']
        .agg(['mean', 'median', 'count'])
        .reset_index()
    )
    print(stats.to_string(index=False))


def main(args: Optional[List[str]] = None) -> int:
    """
    Main entry point.

    Args:
        args: Optional list of command line arguments

    Returns:
        Exit code (0 for success, non-zero for error)
    """
    try:
        parsed_args = parse_args(args)

        if parsed_args.verbose:
            LogManager().set_level('DEBUG')

        if parsed_args.command in ('run', 'sweep'):
            run(parsed_args)
        elif parsed_args.command == 'cdf':
            if not parsed_args.table.is_file():
                raise ValueError(f"Result table does not exist: {parsed_args.table}")
            emit_cdf(
                ResultTable.from_csv(parsed_args.table),
                parsed_args.metric,
                parsed_args.group_by,
                parsed_args.out_dir,
            )
        elif parsed_args.command == 'summary':
            summary(parsed_args)

        return 0

    except Exception as e:
        logger = LogManager().get_logger()
        logger.exception(f"Error: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
