# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import logging
import sys


class Logger:
    """
    Package logger, called as Logger.log("w", "message")
    """

    NAME: str = "mv_transaction_costs"
    LEVELS: dict[str, int] = {
        "d": logging.DEBUG,
        "i": logging.INFO,
        "w": logging.WARNING,
        "e": logging.ERROR,
        "c": logging.CRITICAL
    }
    FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    _logger: logging.Logger = logging.getLogger(NAME)
    _handler: logging.Handler | None = None

    @classmethod
    def log(cls, level: str, message: str) -> None:
        """
        Log a message with a single-letter level
        """
        cls._logger.log(cls.LEVELS.get(level, logging.INFO), message)

    @classmethod
    def configure(cls, verbose: bool = False) -> None:
        """
        Attach a stream handler (idempotent), DEBUG when verbose
        """
        if cls._handler is None:
            cls._handler = logging.StreamHandler(stream=sys.stderr)
            cls._handler.setFormatter(logging.Formatter(cls.FORMAT))
            cls._logger.addHandler(cls._handler)
        cls._logger.setLevel(logging.DEBUG if verbose else logging.INFO)
