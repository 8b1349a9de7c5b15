#!/usr/bin/env python3
# -*- coding: UTF-8 -*-
"""Unittest for the logger factory"""

import logging
import unittest
from sys import stdout

from nose2.tools import params

from advtrain.logger import create_logger, verbosity_to_level


class TestLogger(unittest.TestCase):

    def setUp(self) -> None:
        """Run before every test method"""
        # define a format
        custom_format = '[%(asctime)s] [%(levelname)-8s] [%(filename)-15s @'\
                        ' %(funcName)-15s:%(lineno)4s] %(message)s'

        # set basic config and level for all loggers
        logging.basicConfig(level=logging.INFO,
                            format=custom_format,
                            stream=stdout)

        # create a logger for this TestSuite
        self.test_logger = logging.getLogger(__name__)
        self.test_logger.setLevel(logging.DEBUG)

    def tearDown(self) -> None:
        """Run after every test method"""
        pass

    def test_create_logger(self) -> None:
        """Test named and default loggers"""
        logger = create_logger("advtrain.unit", level=logging.WARNING)
        self.assertEqual(logger.name, "advtrain.unit")
        self.assertEqual(logger.level, logging.WARNING)
        self.assertEqual(create_logger().name, "advtrain.logger")

    @params(
        (0, logging.CRITICAL),
        (1, logging.ERROR),
        (3, logging.INFO),
        (4, logging.DEBUG),
        (9, logging.DEBUG),
        (-2, logging.CRITICAL),
    )
    def test_verbosity_to_level(self, verbosity, expectation) -> None:
        """Test counted -v flags map to levels"""
        self.assertEqual(verbosity_to_level(verbosity), expectation)


if __name__ == '__main__':
    unittest.main()
