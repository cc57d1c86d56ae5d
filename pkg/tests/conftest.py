import numpy as np
import pytest
from hypothesis import settings

from beamwander import SimGrid, SourceParams, TurbulenceParams
from beamwander.analytics import GeometryParams

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")

# Inner scale 2*pi*1e-3 m, i.e. reduced inner scale 1e-3 m.
L0_INNER = 6.2831853071795865e-3


@pytest.fixture
def turb_weak():
    return TurbulenceParams(cn2=1e-14, L0=25.0, l0=L0_INNER)


@pytest.fixture
def turb_sweep():
    return TurbulenceParams(cn2=1e-15, L0=1e3, l0=L0_INNER)


@pytest.fixture
def src_4cm():
    return SourceParams(r0=0.04, q0=1e7, lambda_c=float("inf"))


@pytest.fixture
def geom_5km():
    return GeometryParams(z=5e3)


@pytest.fixture
def grid_small():
    # 0.32 m window resolves a 4 cm beam at n = 64 (dx = 5 mm).
    return SimGrid(n=64, dx=0.32 / 64)


@pytest.fixture
def grid_desk():
    return SimGrid(n=256, dx=1.28 / 256)


def total_power(values: np.ndarray, dx: float) -> float:
    return float(np.sum(np.abs(values) ** 2) * dx * dx)
