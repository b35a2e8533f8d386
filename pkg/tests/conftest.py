import numpy as np
import pytest

from hems.data import synth_generate
from hems.env import ApplianceSpec, DayProfile


def toy_day(prices=(0.1, 0.4, 0.2, 0.3), background=None, renewable=None, date="2021-05-01"):
    n = len(prices)
    return DayProfile(
        date=date,
        price=list(prices),
        background=list(background) if background is not None else [0.0] * n,
        renewable=list(renewable) if renewable is not None else [0.0] * n,
        hours=n,
    )


def random_day(rng: np.random.Generator, hours: int, date="2021-05-01") -> DayProfile:
    return DayProfile(
        date=date,
        price=rng.uniform(0.0, 0.5, hours).tolist(),
        background=rng.uniform(0.0, 1.5, hours).tolist(),
        renewable=(rng.uniform(0.0, 2.0, hours) * (rng.random(hours) < 0.6)).tolist(),
        hours=hours,
    )


@pytest.fixture
def spec():
    return ApplianceSpec()


@pytest.fixture(scope="session")
def month():
    return synth_generate(seed=7, days=30)


@pytest.fixture
def day(month):
    return month[0]
