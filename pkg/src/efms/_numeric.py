"""Scalar arithmetic helpers.

Coefficient sets may hold plain floats, exact ``Fraction`` values, or mpmath
``mpf`` values.  Routines that need transcendental functions pick the matching
library through :func:`lib_for`.  mpmath keeps its working precision in a
process-global context, so every multiprecision section runs under
:data:`MP_LOCK`.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager
from fractions import Fraction

import mpmath

MP_LOCK = threading.RLock()
EPS = 2.220446049250313e-16


def is_mp(values) -> bool:
    return any(isinstance(v, mpmath.mpf) for v in values)


def is_exact(values) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


@contextmanager
def precision(dps):
    """Run a block at ``dps`` decimal digits; no-op when ``dps`` is None."""
    if dps is None:
        yield
        return
    with MP_LOCK:
        with mpmath.workdps(dps):
            yield


def lib_for(dps):
    return math if dps is None else mpmath


def to_float(x) -> float:
    return float(x)


def to_mp(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def convert(x, dps):
    """Convert ``x`` to float (``dps`` None) or to mpf at the current precision."""
    if dps is None:
        return float(x)
    return to_mp(x)
