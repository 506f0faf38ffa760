import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrsnap.distortion import LevelFamily
from qrsnap.schedule import PRISTINE, SchedulePlan, lr_at, make_cycle_plan, snapshot_points

# 0.05 * (cos(0.98 pi) + 1), mpmath at 40 digits
LR_T50 = 9.866357858642190238e-05


def test_reference_values():
    plan = SchedulePlan(0.1, 100, 2)
    assert lr_at(1, plan) == 0.1
    assert lr_at(26, plan) == pytest.approx(0.05, abs=1e-15)
    assert lr_at(50, plan) == pytest.approx(LR_T50, rel=1e-12)
    assert lr_at(51, plan) == 0.1


def test_snapshot_points():
    assert snapshot_points(SchedulePlan(0.1, 100, 2)) == [50, 100]
    assert snapshot_points(SchedulePlan(0.1, 64, 1)) == [64]
    assert snapshot_points(SchedulePlan(0.1, 128, 4)) == [32, 64, 96, 128]


def test_validation():
    with pytest.raises(ValueError):
        SchedulePlan(0.1, 101, 2)
    with pytest.raises(ValueError):
        SchedulePlan(0.0, 100, 2)
    with pytest.raises(ValueError):
        SchedulePlan(0.1, 1, 2)
    plan = SchedulePlan(0.1, 10, 2)
    for t in (0, 11):
        with pytest.raises(ValueError):
            lr_at(t, plan)


plans = st.builds(
    lambda a, m, length: SchedulePlan(a, m * length, m),
    st.floats(1e-4, 1.0),
    st.integers(1, 6),
    st.integers(2, 60),
)


@given(plans)
def test_cycle_shape(plan):
    L = plan.cycle_length
    lrs = [lr_at(t, plan) for t in range(1, plan.total_iters + 1)]
    for m in range(plan.cycles):
        cyc = lrs[m * L : (m + 1) * L]
        assert cyc[0] == plan.alpha0
        assert all(a > b for a, b in zip(cyc, cyc[1:]))
        assert min(cyc) == pytest.approx(plan.alpha0 / 2 * (math.cos(math.pi * (L - 1) / L) + 1), rel=1e-12)
        assert min(cyc) > 0
        assert cyc == lrs[:L]  # identical across cycles
    for p in snapshot_points(plan):
        assert p == plan.total_iters or lr_at(p + 1, plan) == plan.alpha0


def test_cycle_plan():
    plan = make_cycle_plan([LevelFamily.noise(), LevelFamily.blur()], 32, 0.05)
    assert [c.specialty for c in plan] == ["gaussian_noise", "gaussian_blur"]
    assert [c.epochs for c in plan] == [32, 32]
    base = make_cycle_plan([None], 5)
    assert len(base) == 1 and base[0].specialty == PRISTINE and base[0].epochs == 5
    one = make_cycle_plan([LevelFamily.blur()], 1)
    assert len(one) == 1 and one[0].epochs == 1
    with pytest.raises(ValueError):
        make_cycle_plan([], 3)
    with pytest.raises(ValueError):
        make_cycle_plan([None], 0)
