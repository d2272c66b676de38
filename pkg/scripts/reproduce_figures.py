#!/usr/bin/env python3
"""
Preset campaigns for the rate, IPD and SAR CDFs and the SAR-cap and user-load sweeps.
"""

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from campaign import run_campaign, summarize_min_rates
from cdf_export import emit_cdf
from config import MASTER_SEED, MAX_WORKERS, NUM_DROPS
from logger import LogManager
from models import CampaignSpec, DeploymentMode, Direction, NetworkConfig, SchemeId

logger = LogManager().get_logger("reproduce_figures")

REFERENCE_NETWORK = NetworkConfig(num_users=20, num_aps=40, antennas_per_ap=4, association_size=5)


@dataclass
class Preset:
    description: str
    schemes: List[SchemeId]
    directions: List[Direction]
    deployments: List[DeploymentMode] = field(default_factory=lambda: list(DeploymentMode))
    sweeps: Dict[str, List[float]] = field(default_factory=dict)
    exports: List[Tuple[str, List[str]]] = field(default_factory=list)


PRESETS: Dict[str, Preset] = {
    'dl_cdf': Preset(
        description="Downlink rate and IPD CDFs, cell-free vs multi-cell",
        schemes=[SchemeId.OPC, SchemeId.UO, SchemeId.UPC, SchemeId.PPC],
        directions=[Direction.DL],
        exports=[('rate', ['scheme', 'deployment']), ('ipd', ['scheme', 'deployment'])],
    ),
    'ul_cdf': Preset(
        description="Uplink rate and SAR CDFs, cell-free vs multi-cell",
        schemes=[SchemeId.OPC, SchemeId.UO, SchemeId.UPC, SchemeId.FPC],
        directions=[Direction.UL],
        exports=[('rate', ['scheme', 'deployment']), ('sar', ['scheme', 'deployment'])],
    ),
    'ul_sar_sweep': Preset(
        description="Uplink rate CDFs for tightening SAR caps",
        schemes=[SchemeId.OPC, SchemeId.UO],
        directions=[Direction.UL],
        deployments=[DeploymentMode.CELL_FREE],
        sweeps={'sar_cap': [0.08, 0.008, 0.0008]},
        exports=[('rate', ['scheme', 'sweep_e'])],
    ),
    'user_sweep': Preset(
        description="Rate CDFs for growing user load",
        schemes=[SchemeId.OPC],
        directions=[Direction.DL, Direction.UL],
        sweeps={'num_users': [10, 20, 30, 40]},
        exports=[('rate', ['direction', 'deployment', 'sweep_k'])],
    ),
}


def build_spec(preset: Preset, num_drops: int, seed: int) -> CampaignSpec:
    return CampaignSpec(
        base=REFERENCE_NETWORK,
        schemes=preset.schemes,
        deployments=preset.deployments,
        directions=preset.directions,
        num_drops=num_drops,
        master_seed=seed,
        sweeps=preset.sweeps,
    )


def reproduce(name: str, num_drops: int, seed: int, threads: int, out_dir: Path) -> None:
    preset = PRESETS[name]
    logger.info(f"{name}: {preset.description} ({num_drops} drops)")

    table = run_campaign(build_spec(preset, num_drops, seed), max_workers=threads)
    preset_dir = out_dir / name
    table.to_csv(preset_dir / "results.csv")
    summarize_min_rates(table).to_csv(preset_dir / "min_rates.csv", index=False)

    for metric, group_by in preset.exports:
        emit_cdf(table, metric, group_by, preset_dir)


def main(args: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument('presets', nargs='*',
                        help=f"Presets to run (default: all of {', '.join(PRESETS)})")
    parser.add_argument('--drops', type=int, default=NUM_DROPS)
    parser.add_argument('--seed', type=int, default=MASTER_SEED)
    parser.add_argument('--threads', type=int, default=MAX_WORKERS)
    parser.add_argument('--out-dir', type=Path, default=Path("results/figures"))
    parsed = parser.parse_args(args)
    unknown = [name for name in parsed.presets if name not in PRESETS]
    if unknown:
        parser.error(f"unknown preset(s): {', '.join(unknown)}")

    try:
        for name in parsed.presets or list(PRESETS):
            reproduce(name, parsed.drops, parsed.seed, parsed.threads, parsed.out_dir)
        return 0
    except Exception as e:
        logger.exception(f"Error: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
