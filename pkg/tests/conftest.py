"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from levyshell import levy, shell


@pytest.fixture(scope="session")
def ts_half():
    """Symmetric tempered stable with exponent 1/2."""
    return levy.LevyMeasureSpec.tempered_stable(1.0, 1.0, 1.0, 1.0, 0.5)


@pytest.fixture(scope="session")
def vg_unit():
    """Symmetric variance gamma (sigma=1, theta=0, vartheta=1): c=1, beta=sqrt(2)."""
    return levy.LevyMeasureSpec.variance_gamma(1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def asym_spec():
    return levy.LevyMeasureSpec.tempered_stable(2.0, 0.5, 1.5, 3.0, 0.3)


@pytest.fixture(scope="session")
def sabra8():
    return shell.ModelParams(n=8)


@pytest.fixture(scope="session")
def goy8():
    return shell.ModelParams(n=8, model="goy")


def zscore(sample_mean, target, sample_std, n):
    return (sample_mean - target) / (sample_std / np.sqrt(n))
