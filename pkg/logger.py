"""Logging configuration and utilities.

All modules log through children of the ``cellfree_emf`` logger. Console
output goes through tqdm so that log lines do not break campaign progress
bars; the dated log file always records INFO and above, whatever the
console level.
"""

import logging
from datetime import datetime, timedelta
from typing import Any, Dict, MutableMapping, Optional, Tuple

from tqdm import tqdm

from config import LOG_DIR, LOG_FORMAT, LOG_LEVEL, LOG_RETENTION_DAYS

BASE_LOGGER = 'cellfree_emf'
LOG_GLOB = f"{BASE_LOGGER}_*.log"


class TqdmHandler(logging.StreamHandler):
    """Console handler that writes above active tqdm bars."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record))
        except Exception:
            self.handleError(record)


class DropLogAdapter(logging.LoggerAdapter):
    """Prefixes messages with the sweep point and drop being simulated."""

    def process(self, msg: Any, kwargs: MutableMapping[str, Any]) -> Tuple[Any, MutableMapping[str, Any]]:
        return f"[sweep {self.extra['sweep']} drop {self.extra['drop']}] {msg}", kwargs


class LogManager:
    """Manages application logging with file and console output."""

    _instance: Optional['LogManager'] = None

    def __new__(cls) -> 'LogManager':
        """Ensure singleton instance."""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        """Initialize logging configuration if not already initialized."""
        if hasattr(self, '_initialized'):
            return

        self._initialized = True
        self.log_dir = LOG_DIR
        self.log_dir.mkdir(parents=True, exist_ok=True)

        self.logger = logging.getLogger(BASE_LOGGER)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False

        # Prevent duplicate handlers
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)
        self._setup_handlers()

    def _setup_handlers(self):
        """Configure a dated file handler and a tqdm-aware console handler."""
        formatter = logging.Formatter(LOG_FORMAT)

        log_file = self.log_dir / f"{BASE_LOGGER}_{datetime.now():%Y%m%d}.log"
        self.file_handler = logging.FileHandler(log_file)
        self.file_handler.setFormatter(formatter)
        self.file_handler.setLevel(min(logging.INFO, logging.getLevelName(LOG_LEVEL)))

        self.console_handler = TqdmHandler()
        self.console_handler.setFormatter(formatter)
        self.console_handler.setLevel(LOG_LEVEL)

        self.logger.addHandler(self.file_handler)
        self.logger.addHandler(self.console_handler)

    def get_logger(self, name: Optional[str] = None) -> logging.Logger:
        """
        Get a logger instance.

        Args:
            name: Optional module name (prefixed with the base logger name)

        Returns:
            Configured logger instance
        """
        if name:
            return self.logger.getChild(name)
        return self.logger

    def drop_logger(self, name: str, sweep_index: int, drop: int) -> DropLogAdapter:
        """Module logger whose messages carry the (sweep point, drop) they concern."""
        return DropLogAdapter(self.get_logger(name), {'sweep': sweep_index, 'drop': drop})

    def set_level(self, level: str) -> None:
        """Set the console level; DEBUG also sends solver traces to the log file."""
        self.console_handler.setLevel(level)
        self.file_handler.setLevel(min(logging.INFO, logging.getLevelName(level)))

    def archive_logs(self, days: int = LOG_RETENTION_DAYS) -> int:
        """
        Move dated log files not written to for `days` days into log_dir/archive.

        Returns:
            Number of files moved; stops at the first file that cannot be moved
        """
        cutoff = datetime.now() - timedelta(days=days)
        stale = [
            path for path in sorted(self.log_dir.glob(LOG_GLOB))
            if datetime.fromtimestamp(path.stat().st_mtime) < cutoff
        ]
        if not stale:
            return 0

        target = self.log_dir / "archive"
        target.mkdir(exist_ok=True)
        moved = 0
        for path in stale:
            try:
                path.replace(target / path.name)
            except OSError as e:
                self.logger.warning(f"Could not archive {path.name}: {e}")
                break
            moved += 1
        self.logger.debug(f"Archived {moved} log file(s) older than {days} days")
        return moved

    def get_log_stats(self) -> Dict[str, int]:
        """File counts and byte sizes of the current and archived logs."""
        stats: Dict[str, int] = {}
        for label, folder in (('current', self.log_dir), ('archived', self.log_dir / "archive")):
            sizes = [path.stat().st_size for path in folder.glob(LOG_GLOB)]
            stats[f'{label}_logs'] = len(sizes)
            stats[f'{label}_size_bytes'] = sum(sizes)
        stats['total_size_bytes'] = stats['current_size_bytes'] + stats['archived_size_bytes']
        return stats
