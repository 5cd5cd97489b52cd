import pytest
from hypothesis import given, strategies as st

from trafficrl.baselines import FixedPlanController, FstController, fst_cycle, fst_plan, parse_fst
from trafficrl.errors import ArgumentError
from trafficrl.sim import Simulator, build_network


def test_fst_schedules():
    assert fst_plan(FstController(60)) == (60, 60, 60, 60)
    assert fst_cycle(FstController(60)) == 240
    assert fst_plan(FstController(120)) == (120, 120, 120, 120)
    assert fst_cycle(FstController(60), intergreen=5) == 260


@pytest.mark.parametrize("period", [0, -10])
def test_non_positive_period(period):
    with pytest.raises(ArgumentError):
        FstController(period)


@pytest.mark.parametrize("text, period", [("FST60", 60), ("fst-90", 90), ("120", 120)])
def test_parse_labels(text, period):
    ctl = parse_fst(text)
    assert ctl.period == period and ctl.label == f"FST{period}"
    with pytest.raises(ArgumentError):
        parse_fst("sixty")


@given(st.sampled_from([20, 60, 90, 120]), st.integers(1, 4))
def test_round_robin_fairness(period, cycles):
    sim = Simulator(build_network("single"))
    green = [0, 0, 0, 0]
    ctl = FstController(period)
    sim.set_plan("X", ctl.plan())
    done = 0
    while done < cycles:
        green[sim.topology.intersections["X"].current_phase] += 1
        sim.step()
        if sim.needs_plan("X"):
            done += 1
            if done < cycles:
                sim.set_plan("X", ctl.plan())
    assert green == [period * cycles] * 4


def test_fixed_plan_controller():
    ctl = FixedPlanController((40, 20, 20, 20))
    assert ctl.plan() == (40.0, 20.0, 20.0, 20.0) and ctl.label == "FIX-40-20-20-20"
    with pytest.raises(ArgumentError):
        FixedPlanController((40, 20, 20))
