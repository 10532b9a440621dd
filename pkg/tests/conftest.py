import numpy as np
import pytest

from windbag.dataset import SampleRecord


def make_records(wind, power=None, temp=None, blade=None, start=0, extras=None):
    """Records on the 10-minute grid from per-channel lists (missing channels get simple defaults)."""
    n = len(wind)
    power = [100.0 * i for i in range(n)] if power is None else power
    temp = [10.0] * n if temp is None else temp
    blade = [0.0] * n if blade is None else blade
    out = []
    for i in range(n):
        ex = tuple((name, float(vals[i])) for name, vals in (extras or {}).items())
        out.append(SampleRecord(start + 10 * i, float(wind[i]), float(blade[i]), float(temp[i]), float(power[i]), ex))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
