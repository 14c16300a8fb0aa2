import json
import math
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llmsat.orbit import ENCELADUS, circular_orbit
from llmsat.vessel import (
    G0,
    InsufficientPropellant,
    burn_consume,
    delta_v_capacity,
    load_parts_tree,
    load_vessel,
    propellant_mass,
    run_temperature_scan,
    total_mass,
    usable_propellant_mass,
)


@pytest.fixture(scope="module")
def vessel():
    return load_vessel(circular_orbit(ENCELADUS, 146553.0016))


def test_fixture_mass(vessel):
    assert total_mass(vessel) == pytest.approx(4261.23095703125, rel=1e-6)
    assert vessel.engine.thrust == 18890.0 and vessel.engine.isp == 314.0


def test_burn_leaves_expected_tank_levels(vessel):
    after = burn_consume(vessel, 9.491729)
    assert after.tank("UDMH").amount == pytest.approx(1242.300, rel=1e-2)
    assert after.tank("NTO").amount == pytest.approx(1323.378, rel=1e-2)


def test_burn_mass_matches_rocket_equation(vessel):
    dv = 9.491729
    m0 = total_mass(vessel)
    oracle = m0 * (1.0 - math.exp(-dv / (314.0 * G0)))
    burned = total_mass(vessel) - total_mass(burn_consume(vessel, dv))
    assert burned == pytest.approx(oracle, rel=5e-3)
    assert burned == pytest.approx(13.11, abs=0.01)


def test_burn_uses_fixed_volume_ratio(vessel):
    after = burn_consume(vessel, 50.0)
    used_udmh = vessel.tank("UDMH").amount - after.tank("UDMH").amount
    used_nto = vessel.tank("NTO").amount - after.tank("NTO").amount
    assert used_nto / used_udmh == pytest.approx(1.065, rel=1e-12)


def test_non_propellant_tanks_untouched(vessel):
    after = burn_consume(vessel, 100.0)
    assert after.tank("ElectricCharge") == vessel.tank("ElectricCharge")
    assert after.tank("Ore") == vessel.tank("Ore")


def test_capacity_is_exactly_burnable(vessel):
    capacity = delta_v_capacity(vessel)
    assert capacity > 1000.0
    emptied = burn_consume(vessel, capacity)
    assert min(emptied.tank("UDMH").amount, emptied.tank("NTO").amount / 1.065) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(InsufficientPropellant):
        burn_consume(vessel, capacity * 1.001)


def test_zero_and_invalid_burns(vessel):
    assert burn_consume(vessel, 0.0) is vessel
    with pytest.raises(ValueError):
        burn_consume(vessel, -1.0)
    with pytest.raises(ValueError):
        burn_consume(vessel, math.inf)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 500.0), st.floats(0.0, 500.0))
def test_split_burns_equal_one_burn(vessel, first, second):
    split = burn_consume(burn_consume(vessel, first), second)
    joined = burn_consume(vessel, first + second)
    assert total_mass(split) == pytest.approx(total_mass(joined), rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 1000.0))
def test_propellant_strictly_decreases(vessel, dv):
    after = burn_consume(vessel, dv)
    assert propellant_mass(after) < propellant_mass(vessel)
    assert usable_propellant_mass(after) >= 0.0


def test_parts_tree_round_trips_fixture():
    raw = resources.files("llmsat.data").joinpath("parts_tree.json").read_text(encoding="utf-8")
    tree = load_parts_tree()
    assert tree.to_dict() == json.loads(raw)
    assert json.dumps(tree.to_dict(), indent=4) == raw.rstrip("\n")
    assert tree.name == "HECS2.ProbeCore"
    assert len({p.id for p in tree.walk()}) == len(list(tree.walk()))


def test_temperature_scan_records_context(vessel):
    journal = []
    result = run_temperature_scan(vessel, 42.0, journal)
    assert journal == [result]
    assert result.value == "127.0K"
    assert result.altitude == pytest.approx(146553.0016, abs=1e-6)
    assert result.body == "Enceladus"
    assert result.inclination == 0.0
