"""Monte-Carlo campaigns over drops, deployments, directions and schemes.

Every (sweep point, drop) is simulated end to end by one worker: the
scenario, channels, estimates and beams are built once per deployment and
shared by all schemes, and the metrics are always evaluated on the true
channels. Seeds are derived from (master_seed, sweep index, drop index) so a
drop gives the same rows no matter which worker runs it or whether it was
loaded from a checkpoint.
"""

import concurrent.futures
import hashlib
import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from channel import draw_channel_set
from checkpoint_manager import CheckpointManager, step_name
from config import MAX_WORKERS, RESULT_COLUMNS
from estimation import assign_pilots, estimate_channels
from logger import LogManager
from metrics import conjugate_beamformers, evaluate_user_metrics
from models import (
    BeamformerSet, CampaignSpec, ChannelSet, DeploymentMode, Direction,
    ExposureLimits, FeasibilityStatus, NetworkConfig, PowerAllocation, Scenario,
    SchemeId,
)
from power_control import (
    build_dl_problem, build_gain_table, fpc_ul, ppc_dl, solve_dl_maxmin,
    solve_ul_maxmin, upc_dl, upc_ul,
)
from scenario import draw_user_positions, generate_drop, to_multicell

logger = LogManager().get_logger("campaign")

SUMMARY_KEYS = ['sweep_k', 'sweep_e', 'drop', 'deployment', 'direction', 'scheme']

# Child seeds spawned per drop
_POSITIONS, _GEOMETRY, _FADING, _PAIRING, _PILOT_NOISE = range(5)


class ResultTable:
    """Per-user result rows with the fixed CSV header."""

    def __init__(self, frame: Optional[pd.DataFrame] = None):
        if frame is None:
            frame = pd.DataFrame(columns=RESULT_COLUMNS)
        missing = [column for column in RESULT_COLUMNS if column not in frame.columns]
        if missing:
            raise ValueError(f"Result table lacks columns: {', '.join(missing)}")
        self.frame = frame[RESULT_COLUMNS].reset_index(drop=True)

    @classmethod
    def from_rows(cls, rows: List[Dict]) -> 'ResultTable':
        return cls(pd.DataFrame(rows, columns=RESULT_COLUMNS))

    @classmethod
    def concat(cls, frames: List[pd.DataFrame]) -> 'ResultTable':
        if not frames:
            return cls()
        return cls(pd.concat(frames, ignore_index=True))

    def __len__(self) -> int:
        return len(self.frame)

    def failures(self) -> pd.DataFrame:
        """Rows whose solve failed (no rate)."""
        return self.frame[self.frame['rate_bps'].isna()]

    def to_csv(self, path: Union[str, Path]) -> Path:
        output = Path(path)
        output.parent.mkdir(parents=True, exist_ok=True)
        self.frame.to_csv(output, index=False)
        return output

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> 'ResultTable':
        return cls(pd.read_csv(path, float_precision='round_trip'))


@dataclass
class DropContext:
    """Everything the schemes of one deployment share within a drop."""
    config: NetworkConfig
    scenario: Scenario
    channels: ChannelSet
    beams: BeamformerSet


def campaign_fingerprint(spec: CampaignSpec) -> str:
    """Stable hash of everything that influences the result rows."""
    payload = {
        'base': asdict(spec.base),
        'limits': {
            'ipd_caps': spec.limits.ipd_caps.tolist(),
            'sar_caps': spec.limits.sar_caps.tolist(),
            'sar_coeffs': spec.limits.sar_coeffs.tolist(),
        },
        'schemes': [scheme.value for scheme in spec.schemes],
        'deployments': [mode.value for mode in spec.deployments],
        'directions': [direction.value for direction in spec.directions],
        'master_seed': spec.master_seed,
        'sweeps': spec.sweeps,
        'fpc_exponent': spec.fpc_exponent,
        'baselines_respect_emf': spec.baselines_respect_emf,
        'dl_loop_nesting': spec.dl_loop_nesting,
        'sco_tolerance': spec.sco_tolerance,
        'bisection_tolerance': spec.bisection_tolerance,
        'max_outer_iterations': spec.max_outer_iterations,
        'record_timing': spec.record_timing,
    }
    encoded = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(encoded).hexdigest()


def sweep_setting(spec: CampaignSpec, point: Dict[str, float]) -> Tuple[NetworkConfig, ExposureLimits]:
    """
    Network configuration and limits of one sweep point.

    Changing K re-derives tau_p, tau_d and tau_u and resizes the limits.
    """
    config = spec.base
    if 'num_users' in point:
        config = config.with_num_users(int(point['num_users']))
    limits = spec.limits.broadcast(config.num_users)
    if 'sar_cap' in point:
        limits = ExposureLimits(
            ipd_caps=limits.ipd_caps,
            sar_caps=np.full(limits.sar_caps.shape, float(point['sar_cap'])),
            sar_coeffs=limits.sar_coeffs,
        )
    return config, limits


def drop_seeds(master_seed: int, sweep_index: int, drop: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence([master_seed, sweep_index, drop]).spawn(5)


def drop_user_positions(config: NetworkConfig, seeds: List[np.random.SeedSequence]) -> np.ndarray:
    """User positions of a drop, shared by both deployments."""
    return draw_user_positions(config, np.random.default_rng(seeds[_POSITIONS]))


def prepare_drop(
    config: NetworkConfig,
    seeds: List[np.random.SeedSequence],
    user_positions: np.ndarray,
) -> DropContext:
    """Scenario, channels, estimates and conjugate beams of one deployment."""
    scenario = generate_drop(config, seeds[_GEOMETRY], user_positions)
    channels = draw_channel_set(scenario, np.random.default_rng(seeds[_FADING]))
    book = assign_pilots(
        config.num_users,
        config.pilot_length,
        user_positions,
        side=config.area_side,
        pairing=config.pilot_pairing,
        rng=np.random.default_rng(seeds[_PAIRING]),
    )
    channels = estimate_channels(
        channels, book, config, np.random.default_rng(seeds[_PILOT_NOISE])
    )
    beams = conjugate_beamformers(channels.estimates, scenario.association)
    return DropContext(config, scenario, channels, beams)


def allocate(
    scheme: SchemeId,
    direction: Direction,
    context: DropContext,
    limits: ExposureLimits,
    spec: CampaignSpec,
) -> PowerAllocation:
    """
    Powers of one scheme, designed on the channel estimates.

    Raises:
        ValueError: If the scheme does not apply to the direction
    """
    config = context.config
    scenario = context.scenario
    estimates = context.channels.estimates
    association = scenario.association

    if direction is Direction.DL:
        if scheme in (SchemeId.OPC, SchemeId.UO):
            design_limits = limits if scheme is SchemeId.OPC else limits.relaxed()
            data = build_dl_problem(estimates, context.beams.dl_beams, association,
                                    design_limits, config)
            solution = solve_dl_maxmin(
                data,
                tol_sco=spec.sco_tolerance,
                tol_bisect=spec.bisection_tolerance,
                max_outer=spec.max_outer_iterations,
                nesting=spec.dl_loop_nesting,
            )
            if solution.status is not FeasibilityStatus.FEASIBLE:
                logger.warning(f"DL {scheme.value} solve ended with {solution.status.value}")
            return PowerAllocation(dl_powers=solution.powers)
        if scheme is SchemeId.UPC:
            return PowerAllocation(dl_powers=upc_dl(scenario))
        if scheme is SchemeId.PPC:
            return PowerAllocation(dl_powers=ppc_dl(scenario))
    else:
        if scheme in (SchemeId.OPC, SchemeId.UO):
            design_limits = limits if scheme is SchemeId.OPC else limits.relaxed()
            table = build_gain_table(estimates, context.beams.ul_filters, association,
                                     config.noise_power, design_limits, config.ul_power_budget)
            solution = solve_ul_maxmin(table, config, spec.bisection_tolerance)
            return PowerAllocation(ul_powers=solution.powers)
        if scheme is SchemeId.UPC:
            return PowerAllocation(ul_powers=upc_ul(scenario, limits, spec.baselines_respect_emf))
        if scheme is SchemeId.FPC:
            return PowerAllocation(ul_powers=fpc_ul(
                scenario, limits, spec.fpc_exponent, spec.baselines_respect_emf
            ))

    raise ValueError(f"Scheme {scheme.value} does not apply to {direction.value}")


def _rows(
    drop: int,
    deployment: DeploymentMode,
    direction: Direction,
    scheme: SchemeId,
    num_users: int,
    sweep_e: float,
    solve_time: float,
    rates: Optional[np.ndarray] = None,
    ipd: Optional[np.ndarray] = None,
    sar: Optional[np.ndarray] = None,
) -> List[Dict]:
    nan = np.full(num_users, np.nan)
    rates = nan if rates is None else rates
    ipd = nan if ipd is None else ipd
    if sar is None:
        sar = nan
    elif sar.ndim == 2:
        sar = sar.max(axis=1)  # worst body part
    return [
        {
            'drop': drop,
            'deployment': deployment.value,
            'direction': direction.value,
            'scheme': scheme.value,
            'user': user,
            'rate_bps': float(rates[user]),
            'ipd_w_m2': float(ipd[user]),
            'sar_w_kg': float(sar[user]),
            'solve_time_s': solve_time,
            'sweep_k': num_users,
            'sweep_e': sweep_e,
        }
        for user in range(num_users)
    ]


def simulate_drop(
    spec: CampaignSpec,
    sweep_index: int,
    point: Dict[str, float],
    drop: int,
) -> pd.DataFrame:
    """
    Rows of every (deployment, direction, scheme) for one drop.

    Failures are logged and turned into rows without rates.
    """
    config, limits = sweep_setting(spec, point)
    seeds = drop_seeds(spec.master_seed, sweep_index, drop)
    user_positions = drop_user_positions(config, seeds)
    sweep_e = float(limits.sar_caps[0, 0])
    num_users = config.num_users
    drop_log = LogManager().drop_logger("campaign", sweep_index, drop)
    rows: List[Dict] = []

    combinations = [
        (direction, scheme)
        for direction in spec.directions
        for scheme in spec.schemes
        if scheme.supports(direction)
    ]

    for deployment in spec.deployments:
        deployment_config = config if deployment is DeploymentMode.CELL_FREE else to_multicell(config)
        try:
            context = prepare_drop(deployment_config, seeds, user_positions)
        except Exception as e:
            drop_log.error(f"{deployment.value} drop could not be set up: {e}")
            for direction, scheme in combinations:
                rows.extend(_rows(drop, deployment, direction, scheme, num_users, sweep_e, 0.0))
            continue

        for direction, scheme in combinations:
            start = time.perf_counter()
            try:
                allocation = allocate(scheme, direction, context, limits, spec)
                elapsed = time.perf_counter() - start if spec.record_timing else 0.0
                user_metrics = evaluate_user_metrics(
                    context.channels, context.beams, context.scenario.association,
                    allocation, deployment_config, limits, direction,
                )
                rows.extend(_rows(
                    drop, deployment, direction, scheme, num_users, sweep_e, elapsed,
                    rates=user_metrics.rate, ipd=user_metrics.ipd, sar=user_metrics.sar,
                ))
            except Exception as e:
                drop_log.error(f"{deployment.value}/{direction.value}/{scheme.value} failed: {e}")
                rows.extend(_rows(drop, deployment, direction, scheme, num_users, sweep_e, 0.0))

    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def run_campaign(
    spec: CampaignSpec,
    max_workers: int = MAX_WORKERS,
    checkpoints: Optional[CheckpointManager] = None,
    show_progress: bool = True,
) -> ResultTable:
    """
    Run every sweep point and drop of a campaign.

    Args:
        spec: Campaign settings
        max_workers: Worker threads (one drop per task)
        checkpoints: Optional manager; completed drops are loaded instead of rerun
        show_progress: Show a tqdm progress bar

    Returns:
        ResultTable ordered by sweep point, then drop
    """
    started = time.perf_counter()
    tasks = [
        (sweep_index, point, drop)
        for sweep_index, point in enumerate(spec.sweep_points())
        for drop in range(spec.num_drops)
    ]
    frames: Dict[Tuple[int, int], pd.DataFrame] = {}

    pending = []
    for sweep_index, point, drop in tasks:
        step = step_name(sweep_index, drop)
        if checkpoints is not None and checkpoints.is_step_completed(step):
            loaded = checkpoints.load_step_data(step)
            if loaded is not None:
                frames[(sweep_index, drop)] = loaded
                continue
        pending.append((sweep_index, point, drop))

    if len(pending) < len(tasks):
        logger.info(f"Resuming: {len(tasks) - len(pending)} of {len(tasks)} drops loaded")

    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_task = {
            executor.submit(simulate_drop, spec, sweep_index, point, drop): (sweep_index, drop)
            for sweep_index, point, drop in pending
        }
        for future in tqdm(
            concurrent.futures.as_completed(future_to_task),
            total=len(future_to_task),
            desc="Simulating drops",
            disable=not show_progress,
        ):
            key = future_to_task[future]
            frame = future.result()
            frames[key] = frame
            if checkpoints is not None:
                checkpoints.save_checkpoint(
                    step_name(*key), frame, metadata={'rows': len(frame)}
                )

    table = ResultTable.concat([frames[key] for key in sorted(frames)])
    logger.info(
        f"Campaign finished: {len(tasks)} drops, {len(table)} rows, "
        f"{len(table.failures())} failed rows, {time.perf_counter() - started:.1f}s"
    )
    return table


def summarize_min_rates(table: ResultTable) -> pd.DataFrame:
    """
    Minimum user rate of every (sweep point, drop, deployment, direction, scheme).

    A group with any failed row has no minimum (NaN).
    """
    frame = table.frame
    grouped = frame.groupby(SUMMARY_KEYS, sort=True)['rate_bps']
    summary = grouped.min().rename('min_rate_bps').to_frame()
    summary['failed'] = grouped.apply(lambda rates: bool(rates.isna().any()))
    summary.loc[summary['failed'], 'min_rate_bps'] = np.nan
    return summary.reset_index()
