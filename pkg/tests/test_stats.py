import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mdlgamma.analysis.stats import fit_rate, richardson
from mdlgamma.errors import InconclusiveFit


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(1e-3, 1e3))
def test_exact_power_law(p, c):
    h = np.array([0.2, 0.1, 0.05, 0.025])
    fit = fit_rate(h, c * h ** p)
    assert fit.slope == pytest.approx(p, abs=1e-9)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-2, 2), st.floats(-5, 5), st.floats(-5, 5), st.sampled_from([1, 2]))
def test_richardson_exact_for_two_term_expansion(a, b, c, p):
    h = np.array([0.2, 0.1, 0.05, 0.025])
    v = a + b * h ** p + c * h ** (p + 1)
    assert richardson(h, v, p) == pytest.approx(a, abs=1e-9)


def test_inconclusive():
    with pytest.raises(InconclusiveFit):
        fit_rate([0.1, 0.05], [1.0, 0.5])
    with pytest.raises(InconclusiveFit):
        fit_rate([0.1, 0.05, 0.02], [1.0, 0.0, 0.5])
    noisy = fit_rate([0.4, 0.2, 0.1, 0.05], [1.0, 0.1, 1.0, 0.1])
    assert not noisy.conclusive
    with pytest.raises(InconclusiveFit):
        fit_rate([0.4, 0.2, 0.1, 0.05], [1.0, 0.1, 1.0, 0.1], strict=True)


def test_fit_to_dict():
    d = fit_rate([1, 2, 4], [1, 4, 16]).to_dict()
    assert d["slope"] == pytest.approx(2.0) and len(d["points"]) == 3
