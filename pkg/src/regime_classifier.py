import math

from .errors import InvalidParameter


def ehrenfest_time(hbar, lam=1.0):
    if hbar <= 0 or hbar >= 1:
        raise InvalidParameter("hbar must lie in (0, 1) for a positive Ehrenfest time", hbar)
    if lam <= 0:
        raise InvalidParameter("lam must be positive", hbar)
    return math.log(1.0 / hbar) / lam


def classify_regime(t, hbar, lam=1.0):
    """Label t against the Ehrenfest scale T = log(1/hbar)/lam.

    Below T/4 the packet still follows the classical point, up to 3T/4 it is
    spread over the invariant manifold, beyond that it may reassemble.
    """
    ratio = t / ehrenfest_time(hbar, lam)
    if ratio < 0.25:
        return "semiclassical"
    elif ratio < 0.75:
        return "delocalized"
    else:
        return "relocalization"
