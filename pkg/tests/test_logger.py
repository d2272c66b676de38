import logging
import os
import time

from logger import LogManager


def test_singleton_and_child_names():
    manager = LogManager()
    assert manager is LogManager()
    assert manager.get_logger("campaign").name == "cellfree_emf.campaign"
    assert manager.get_logger() is manager.logger


def test_set_level():
    manager = LogManager()
    try:
        manager.set_level('DEBUG')
        assert manager.console_handler.level == logging.DEBUG
        assert manager.file_handler.level == logging.DEBUG
        manager.set_level('WARNING')
        assert manager.console_handler.level == logging.WARNING
        assert manager.file_handler.level == logging.INFO
    finally:
        manager.set_level('INFO')


def test_drop_logger_prefix():
    adapter = LogManager().drop_logger("campaign", 1, 7)
    message, _ = adapter.process("solve failed", {})
    assert message == "[sweep 1 drop 7] solve failed"
    assert adapter.logger.name == "cellfree_emf.campaign"


def test_archive_and_stats(tmp_path, monkeypatch):
    manager = LogManager()
    monkeypatch.setattr(manager, 'log_dir', tmp_path)

    old = tmp_path / "cellfree_emf_20000101.log"
    old.write_text("old run\n")
    stale = time.time() - 40 * 24 * 3600
    os.utime(old, (stale, stale))
    (tmp_path / "cellfree_emf_29990101.log").write_text("current run\n")

    assert manager.archive_logs(days=30) == 1
    assert manager.archive_logs(days=30) == 0
    assert (tmp_path / "archive" / old.name).exists()

    stats = manager.get_log_stats()
    assert stats['current_logs'] == 1
    assert stats['archived_logs'] == 1
    assert stats['archived_size_bytes'] == len("old run\n")
    assert stats['total_size_bytes'] == len("old run\n") + len("current run\n")
