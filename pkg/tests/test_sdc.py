import pytest

from preslack.errors import ParseError
from preslack.sdc import SdcConstraints, parse_sdc, write_sdc

CLOCK = "create_clock -period 10 [get_ports clk]\n"


def test_create_clock():
    sdc = parse_sdc(CLOCK)
    assert (sdc.clock_period, sdc.clock_port, sdc.clock_uncertainty) == (10.0, "clk", 0.0)


def test_uncertainty_and_output_delay():
    sdc = parse_sdc(CLOCK + "set_clock_uncertainty 0.25 [get_clocks clk]\nset_output_delay -max 2 [get_ports out1]\n")
    assert sdc.clock_uncertainty == 0.25
    assert sdc.output_delays["out1"] == 2.0
    assert sdc.output_delay("out1") == 2.0
    assert sdc.output_delay("other") == 0.0


def test_clock_is_required_and_unique():
    with pytest.raises(ParseError):
        parse_sdc("set_clock_uncertainty 0.1 [get_clocks c]\n")
    with pytest.raises(ParseError):
        parse_sdc(CLOCK + "create_clock -period 5 [get_ports clk2]\n")


def test_mini_sdc(mini_sdc):
    sdc = mini_sdc
    assert sdc.clock_period == 1.2
    assert sdc.clock_name == "core_clk"
    assert sdc.clock_uncertainty == 0.05  # the -hold value is ignored
    assert sdc.input_delay("in1") == sdc.input_delay("in2") == 0.1
    assert sdc.output_delay("out2") == pytest.approx(0.3)
    assert len(sdc.ignored) == 2


def test_write_round_trip():
    sdc = SdcConstraints(4.0, "ck", "c0", 0.1, {"o1": 0.5, "*": 0.2}, {"i": 0.3})
    assert parse_sdc(write_sdc(sdc)) == sdc
