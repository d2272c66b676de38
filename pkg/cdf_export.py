"""Empirical CDFs of per-user metrics, written as CSV plus a plotting script."""

import re
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from campaign import ResultTable
from logger import LogManager

logger = LogManager().get_logger("cdf_export")

METRIC_COLUMNS: Dict[str, str] = {
    'rate': 'rate_bps',
    'ipd': 'ipd_w_m2',
    'sar': 'sar_w_kg',
}

METRIC_LABELS: Dict[str, str] = {
    'rate': 'Per-user rate [bit/s]',
    'ipd': 'Incident power density [W/m^2]',
    'sar': 'SAR [W/kg]',
}

PLOT_TEMPLATE = '''"""Plot {metric} CDFs exported by cellfree-emf."""

from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

HERE = Path(__file__).resolve().parent
SERIES = {series!r}

fig, ax = plt.subplots()
for label, path in SERIES:
    cdf = pd.read_csv(HERE / path)
    ax.step(cdf["value"], cdf["cdf"], where="post", label=label)
ax.set_xlabel({xlabel!r})
ax.set_ylabel("CDF")
ax.grid(True)
ax.legend()
fig.savefig(HERE / {figure!r}, bbox_inches="tight")
'''


def empirical_cdf(samples: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Right-continuous empirical CDF.

    Returns:
        Sorted distinct values and F(value) = #(samples <= value) / n
    """
    values, counts = np.unique(np.asarray(samples, dtype=float), return_counts=True)
    return values, np.cumsum(counts) / counts.sum()


def _label(keys: Tuple) -> str:
    text = "_".join(str(key) for key in keys)
    return re.sub(r'[^A-Za-z0-9.\-]+', '_', text)


def emit_cdf(
    table: ResultTable,
    metric: str,
    group_by: Sequence[str],
    out_dir: Union[str, Path],
) -> List[Path]:
    """
    Write one CDF file per group and a script that plots them.

    Args:
        table: Result rows
        metric: 'rate', 'ipd' or 'sar'
        group_by: Result columns to group on (e.g. scheme, deployment)
        out_dir: Output directory

    Returns:
        Paths of the CSV files written (empty groups are skipped)

    Raises:
        ValueError: On an unknown metric or grouping key, or an empty table
    """
    if metric not in METRIC_COLUMNS:
        raise ValueError(f"Unknown metric {metric!r}; choose from {', '.join(METRIC_COLUMNS)}")
    frame = table.frame
    unknown = [key for key in group_by if key not in frame.columns]
    if unknown:
        raise ValueError(f"Unknown grouping key(s): {', '.join(unknown)}")
    if frame.empty:
        raise ValueError("Cannot compute CDFs of an empty table")

    column = METRIC_COLUMNS[metric]
    output_dir = Path(out_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    groups = frame.groupby(list(group_by), sort=True) if group_by else [((), frame)]
    written: List[Path] = []
    series = []

    for keys, group in groups:
        keys = keys if isinstance(keys, tuple) else (keys,)
        label = _label(keys) or "all"
        samples = group[column].dropna()
        if samples.empty:
            logger.warning(f"No {metric} samples for group {label}; skipping")
            continue

        values, cdf = empirical_cdf(samples)
        path = output_dir / f"cdf_{metric}_{label}.csv"
        pd.DataFrame({'value': values, 'cdf': cdf}).to_csv(path, index=False)
        written.append(path)
        series.append((label, path.name))

    script = output_dir / f"plot_{metric}_cdf.py"
    script.write_text(PLOT_TEMPLATE.format(
        metric=metric,
        series=series,
        xlabel=METRIC_LABELS[metric],
        figure=f"cdf_{metric}.pdf",
    ))
    logger.info(f"Wrote {len(written)} {metric} CDF file(s) and {script.name} to {output_dir}")
    return written
