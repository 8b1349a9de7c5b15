#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""Logger factory shared by the CLI and the long-running worker classes"""

import logging
import sys
from typing import Optional

LOG_FORMAT = '[%(asctime)s] [%(levelname)-8s] [%(filename)-15s @'\
             ' %(funcName)-15s:%(lineno)4s] %(message)s'

LOG_LEVELS = {
    0: logging.CRITICAL,
    1: logging.ERROR,
    2: logging.WARNING,
    3: logging.INFO,
    4: logging.DEBUG,
}


def create_logger(logger_name: Optional[str] = None,
                  level: int = logging.DEBUG) -> logging.Logger:
    """
    Create a logger

    :param      logger_name:  The logger name
    :type       logger_name:  str, optional
    :param      level:        The level of the returned logger
    :type       level:        int

    :returns:   Configured logger
    :rtype:     logging.Logger
    """
    logging.basicConfig(level=logging.INFO,
                        format=LOG_FORMAT,
                        stream=sys.stdout)

    if logger_name and (isinstance(logger_name, str)):
        logger = logging.getLogger(logger_name)
    else:
        logger = logging.getLogger(__name__)

    logger.setLevel(level)

    return logger


def verbosity_to_level(verbosity: int) -> int:
    """
    Map a counted ``-v`` flag to a logging level

    :param      verbosity:  Number of ``-v`` flags given
    :type       verbosity:  int

    :returns:   Logging level, CRITICAL for 0 up to DEBUG for 4 and more
    :rtype:     int
    """
    return LOG_LEVELS[min(max(verbosity, 0), max(LOG_LEVELS.keys()))]
