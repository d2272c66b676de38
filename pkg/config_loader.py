"""Campaign configuration files.

Line-oriented ``key = value`` text with ``#`` comments. Units are part of the
key name (``_dbm``, ``_mhz``, ``_ghz``, ``_m``) and are converted to SI here;
everything downstream works in watts, hertz and metres. Keys that are not
given keep the defaults from config.py.
"""

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from config import NUM_BODY_PARTS, SAR_COEFF_PER_KG
from logger import LogManager
from models import (
    CampaignSpec, ConfigError, DeploymentMode, Direction, ExposureLimits,
    NetworkConfig, SchemeId,
)
from units import dbm_to_watts

logger = LogManager().get_logger("config_loader")

_TRUE = {'true', 'yes', '1', 'on'}
_FALSE = {'false', 'no', '0', 'off'}


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _parse_watts(value: str) -> float:
    return float(dbm_to_watts(float(value)))


def _list_of(parser: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def parse(value: str) -> List[Any]:
        items = [item.strip() for item in value.split(',') if item.strip()]
        if not items:
            raise ValueError("expected a comma-separated list")
        return [parser(item) for item in items]
    return parse


def _enum_of(enum_type) -> Callable[[str], Any]:
    def parse(value: str):
        try:
            return enum_type(value.strip().lower())
        except ValueError:
            choices = ', '.join(member.value for member in enum_type)
            raise ValueError(f"{value!r} is not one of: {choices}")
    return parse


# key -> (section, field, parser)
CONFIG_KEYS: Dict[str, Tuple[str, str, Callable[[str], Any]]] = {
    'area_side_m': ('network', 'area_side', float),
    'num_users': ('network', 'num_users', int),
    'num_aps': ('network', 'num_aps', int),
    'antennas_per_ap': ('network', 'antennas_per_ap', int),
    'association_size': ('network', 'association_size', int),
    'carrier_frequency_ghz': ('network', 'carrier_frequency', lambda v: float(v) * 1e9),
    'bandwidth_mhz': ('network', 'bandwidth', lambda v: float(v) * 1e6),
    'ap_power_dbm': ('network', 'dl_power_budget', _parse_watts),
    'ul_power_budget_dbm': ('network', 'ul_power_budget', _parse_watts),
    'pilot_power_dbm': ('network', 'pilot_power', _parse_watts),
    'noise_psd_dbm_hz': ('network', 'noise_psd', _parse_watts),
    'coherence_block': ('network', 'coherence_block', int),
    'pilot_length': ('network', 'pilot_length', int),
    'ap_height_m': ('network', 'ap_height', float),
    'user_height_m': ('network', 'user_height', float),
    'ap_layout': ('network', 'ap_layout', str.lower),
    'ap_jitter': ('network', 'ap_jitter', float),
    'antenna_spacing_wavelengths': ('network', 'antenna_spacing', float),
    'shadowing_std_db': ('network', 'shadowing_std_db', float),
    'pilot_pairing': ('network', 'pilot_pairing', str.lower),
    'ipd_cap_w_m2': ('limits', 'ipd_cap', float),
    'sar_cap_w_kg': ('limits', 'sar_cap', float),
    'sar_coeff_per_kg': ('limits', 'sar_coeff', float),
    'num_body_parts': ('limits', 'num_body_parts', int),
    'schemes': ('campaign', 'schemes', _list_of(_enum_of(SchemeId))),
    'deployments': ('campaign', 'deployments', _list_of(_enum_of(DeploymentMode))),
    'directions': ('campaign', 'directions', _list_of(_enum_of(Direction))),
    'num_drops': ('campaign', 'num_drops', int),
    'master_seed': ('campaign', 'master_seed', int),
    'sweep_num_users': ('sweep', 'num_users', _list_of(int)),
    'sweep_sar_cap_w_kg': ('sweep', 'sar_cap', _list_of(float)),
    'fpc_exponent': ('campaign', 'fpc_exponent', float),
    'baselines_respect_emf': ('campaign', 'baselines_respect_emf', _parse_bool),
    'dl_loop_nesting': ('campaign', 'dl_loop_nesting', str.lower),
    'sco_tolerance': ('campaign', 'sco_tolerance', float),
    'bisection_tolerance': ('campaign', 'bisection_tolerance', float),
    'max_outer_iterations': ('campaign', 'max_outer_iterations', int),
    'record_timing': ('campaign', 'record_timing', _parse_bool),
}


def parse_config_text(text: str) -> Dict[str, Dict[str, Any]]:
    """
    Parse configuration text into per-section values.

    Args:
        text: Configuration file contents

    Returns:
        Dict with 'network', 'limits', 'campaign' and 'sweep' sections

    Raises:
        ConfigError: On malformed lines, unknown or repeated keys and bad values
    """
    sections: Dict[str, Dict[str, Any]] = {
        'network': {}, 'limits': {}, 'campaign': {}, 'sweep': {},
    }
    seen = set()

    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", line_number)

        key, value = (part.strip() for part in line.split('=', 1))
        key = key.lower()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}", line_number)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", line_number)
        if not value:
            raise ConfigError(f"missing value for {key!r}", line_number)
        seen.add(key)

        section, name, parser = CONFIG_KEYS[key]
        try:
            sections[section][name] = parser(value)
        except ValueError as e:
            raise ConfigError(f"bad value for {key!r}: {e}", line_number)

    return sections


def build_campaign(sections: Dict[str, Dict[str, Any]]) -> CampaignSpec:
    """
    Assemble a CampaignSpec from parsed sections.

    Raises:
        ValidationError: If a value violates a model constraint
    """
    base = NetworkConfig(**sections.get('network', {}))
    limit_values = sections.get('limits', {})
    limits = ExposureLimits.uniform(
        base.num_users,
        **{
            key: value for key, value in limit_values.items()
            if key in ('ipd_cap', 'sar_cap')
        },
        sar_coeff=limit_values.get('sar_coeff', SAR_COEFF_PER_KG),
        num_body_parts=limit_values.get('num_body_parts', NUM_BODY_PARTS),
    )
    return CampaignSpec(
        base=base,
        limits=limits,
        sweeps=dict(sections.get('sweep', {})),
        **sections.get('campaign', {}),
    )


def load_config(path: Optional[Union[str, Path]] = None) -> CampaignSpec:
    """
    Load a campaign from a configuration file.

    An empty file (or no path) yields the default campaign.

    Args:
        path: Configuration file

    Returns:
        CampaignSpec

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: On parse errors (with the line number)
        ValidationError: On constraint-violating values
    """
    if path is None:
        return build_campaign({})

    config_path = Path(path)
    if not config_path.is_file():
        raise FileNotFoundError(f"Config file does not exist: {config_path}")

    sections = parse_config_text(config_path.read_text())
    spec = build_campaign(sections)
    logger.info(
        f"Loaded {config_path}: K={spec.base.num_users}, M={spec.base.num_aps}, "
        f"L={spec.base.antennas_per_ap}, {spec.num_drops} drops"
    )
    return spec
