"""Checkpoint management for resumable campaigns.

This module handles:
1. Saving the rows of every finished (sweep point, drop)
2. Loading them back when a campaign is resumed
3. Tracking completed steps in completed_steps.json
4. Discarding checkpoints written by a different campaign
"""

import json
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Set, Union

import pandas as pd

from config import CHECKPOINT_DIR
from logger import LogManager

logger = LogManager().get_logger("checkpoint_manager")

INDEX_FILE = 'completed_steps.json'


def step_name(sweep_index: int, drop: int) -> str:
    """Checkpoint key of one drop at one sweep point."""
    return f"sweep{sweep_index:03d}_drop{drop:05d}"


class CheckpointManager:
    """Manages per-drop checkpoints of a campaign."""

    def __init__(self, base_dir: Optional[Union[str, Path]] = None,
                 fingerprint: Optional[str] = None):
        """
        Initialize checkpoint manager.

        Args:
            base_dir: Directory for checkpoint files
            fingerprint: Identifies the campaign; checkpoints stored under a
                different fingerprint are cleared
        """
        self.base_dir = Path(base_dir) if base_dir else CHECKPOINT_DIR
        self.base_dir.mkdir(parents=True, exist_ok=True)
        self.fingerprint = fingerprint

        self.completed_steps: Set[str] = set()
        self.metadata: Dict[str, Dict] = {}

        self._load_checkpoints()

    @property
    def index_path(self) -> Path:
        return self.base_dir / INDEX_FILE

    def _get_data_path(self, step: str) -> Path:
        return self.base_dir / f"{step}.csv"

    def _load_checkpoints(self) -> None:
        """Load the checkpoint index."""
        if not self.index_path.exists():
            return
        try:
            index = json.loads(self.index_path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error loading checkpoints: {e}")
            return

        stored = index.get('fingerprint')
        if self.fingerprint is not None and stored != self.fingerprint:
            logger.warning(
                f"Checkpoints in {self.base_dir} belong to another campaign; clearing them"
            )
            self.completed_steps = set(index.get('completed_steps', []))
            self.clear_checkpoints()
            return

        self.completed_steps = {
            step for step in index.get('completed_steps', [])
            if self._get_data_path(step).exists()
        }
        self.metadata = index.get('metadata', {})
        logger.info(f"Found {len(self.completed_steps)} completed steps in {self.base_dir}")

    def _write_index(self) -> None:
        index = {
            'fingerprint': self.fingerprint,
            'completed_steps': sorted(self.completed_steps),
            'last_updated': datetime.now().isoformat(),
            'metadata': self.metadata,
        }
        self.index_path.write_text(json.dumps(index, indent=2))

    def save_checkpoint(
        self,
        step: str,
        data: pd.DataFrame,
        metadata: Optional[Dict] = None,
    ) -> None:
        """
        Save the rows of a finished step.

        Args:
            step: Step name (see step_name())
            data: Result rows of the step
            metadata: Additional metadata (optional)
        """
        try:
            data.to_csv(self._get_data_path(step), index=False)
            self.completed_steps.add(step)
            if metadata:
                self.metadata[step] = metadata
            self._write_index()
            logger.debug(f"Saved checkpoint for step: {step}")
        except OSError as e:
            logger.error(f"Error saving checkpoint for {step}: {e}")

    def load_step_data(self, step: str) -> Optional[pd.DataFrame]:
        """
        Load the rows of a completed step.

        Returns:
            Step rows if available, None otherwise
        """
        if step not in self.completed_steps:
            return None
        try:
            return pd.read_csv(self._get_data_path(step), float_precision='round_trip')
        except (OSError, pd.errors.ParserError) as e:
            logger.error(f"Error loading data for step {step}: {e}")
            return None

    def is_step_completed(self, step: str) -> bool:
        return step in self.completed_steps

    def clear_checkpoints(self, steps: Optional[List[str]] = None) -> None:
        """
        Clear checkpoints.

        Args:
            steps: Steps to clear (all if None)
        """
        targets = list(self.completed_steps) if steps is None else steps
        for step in targets:
            self._get_data_path(step).unlink(missing_ok=True)
            self.completed_steps.discard(step)
            self.metadata.pop(step, None)

        if steps is None:
            self.index_path.unlink(missing_ok=True)
        else:
            self._write_index()
        logger.info(f"Cleared checkpoints for: {', '.join(steps) if steps else 'all steps'}")

    def get_step_metadata(self, step: str) -> Optional[Dict]:
        return self.metadata.get(step)
