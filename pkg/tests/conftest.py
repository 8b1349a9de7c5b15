"""Let pytest collect nose2 ``@params`` test methods.

The suite is written for nose2 (see ``tox.ini``). pytest does not expand
``nose2.tools.params`` on ``unittest.TestCase`` methods, so this hook
generates one method per parameter set the same way nose2's parameters
plugin does, and removes the un-expanded original from the class.
"""

import functools
import inspect
import unittest

from nose2.plugins.loader.parameters import enumerate_params


def _expand_params(cls) -> None:
    for name, method in list(vars(cls).items()):
        if not (name.startswith("test") and callable(method)
                and hasattr(method, "paramList")):
            continue
        for index, arg_set in enumerate_params(method.paramList):
            method_name = f"{name}_{index}"
            if hasattr(cls, method_name):
                continue

            def _method(self, method=method, arg_set=arg_set):
                return method(self, *arg_set)

            _method = functools.update_wrapper(_method, method)
            del _method.paramList
            _method.__name__ = method_name
            setattr(cls, method_name, _method)
        delattr(cls, name)


def pytest_pycollect_makeitem(collector, name, obj):
    if inspect.isclass(obj) and issubclass(obj, unittest.TestCase):
        _expand_params(obj)
    return None
