import numpy as np
import pytest

from src.errors import DegenerateWindow, InvalidParameter
from src.fitting import linear_fit, log_slope, power_law_fit


def test_linear_fit_recovers_line():
    x = np.linspace(0, 5, 50)
    fit = linear_fit(x, 3.0 * x - 2.0)
    assert fit.slope == pytest.approx(3.0, abs=1e-12)
    assert fit.intercept == pytest.approx(-2.0, abs=1e-12)
    assert fit.residual < 1e-12
    assert fit.samples == 50


def test_log_slope_of_exponential_growth():
    t = np.linspace(0, 4, 100)
    fit = log_slope(t, 1e-8 * np.exp(np.sqrt(2) * t))
    assert fit.slope == pytest.approx(np.sqrt(2), abs=1e-10)


def test_power_law_exponent():
    h = np.array([1e-2, 1e-3, 1e-4])
    fit = power_law_fit(h, 5.0 * h ** 0.5)
    assert fit.slope == pytest.approx(0.5, abs=1e-10)


def test_too_few_samples():
    with pytest.raises(DegenerateWindow):
        linear_fit([1.0], [2.0])
    with pytest.raises(DegenerateWindow):
        power_law_fit([1e-2, 1e-3], [1.0, 2.0])


def test_nonpositive_values_rejected():
    with pytest.raises(InvalidParameter):
        log_slope([0.0, 1.0, 2.0], [1.0, 0.0, 1.0])
