#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""Exception roots shared by all advtrain modules"""


class AdvTrainError(Exception):
    """Base class for all exceptions raised by advtrain."""
    pass


class ConfigError(AdvTrainError):
    """Invalid configuration value, file or command line combination."""
    pass
