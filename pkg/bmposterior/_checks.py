import math

import numpy as np


def _check_type(var_type, var, name):
    if not isinstance(var, var_type):
        raise ValueError("Argument %s is expected to be of type '%s' and not '%s'"
                         % (name, _type_name(var_type), type(var).__name__))


def _check_positive(var, name):
    if not (isinstance(var, (int, float, np.integer, np.floating)) and math.isfinite(var) and var > 0):
        raise ValueError("Argument %s is expected to be a finite positive number and not '%s'" % (name, var))


def _check_fraction(var, name, upper_inclusive=False):
    ok = 0 <= var <= 1 if upper_inclusive else 0 <= var < 1
    if not ok:
        raise ValueError("Argument %s is expected to be in [0, 1%s and not '%s'"
                         % (name, ']' if upper_inclusive else ')', var))


def _type_name(var_type):
    if isinstance(var_type, tuple):
        return ' or '.join(t.__name__ for t in var_type)
    return var_type.__name__
