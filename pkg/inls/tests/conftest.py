# Sets the fixtures for the numerical and CLI tests

import os

os.environ.setdefault("APP_ENV", "testing")

from fractions import Fraction  # noqa: E402
import numpy as np  # noqa: E402
import pytest  # noqa: E402
from click.testing import CliRunner  # noqa: E402
from app.dependencies import Settings  # noqa: E402
from app.schemas import GridSpec, ProblemParams  # noqa: E402
from app.spectral import gaussian, normalize  # noqa: E402


# Set test config
def get_settings_override():
    return Settings(
        _env_file=".test.env",
        _env_file_encoding="utf-8",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20220607)


@pytest.fixture(scope="session")
def grid1d():
    return GridSpec(dimension=1, points_per_axis=256, half_length=16.0)


@pytest.fixture(scope="session")
def grid3d():
    return GridSpec(dimension=3, points_per_axis=16, half_length=8.0)


@pytest.fixture(scope="session")
def subcritical():
    # theta0 = 1/4
    return ProblemParams(d=3, alpha=1, beta=Fraction(1, 3))


@pytest.fixture(scope="session")
def critical():
    # mass-critical: theta0 = 0
    return ProblemParams(d=3, alpha=1, beta=Fraction(2, 3))


@pytest.fixture(scope="session")
def fractional():
    # beta at the midpoint of its H^s window
    return ProblemParams(
        d=3, alpha=Fraction(3, 2), beta=Fraction(5, 28), s=Fraction(1, 10)
    )


@pytest.fixture
def datum(grid3d):
    return normalize(gaussian(grid3d), 0.1)


@pytest.fixture
def runner(monkeypatch):
    import main

    monkeypatch.setattr(main, "get_settings", get_settings_override)
    return CliRunner()
