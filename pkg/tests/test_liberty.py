import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_library, random_lut
from preslack.corners import EARLY, LATE
from preslack.errors import ParseError, StructuralError
from preslack.liberty import (
    LibrarySet,
    Lut,
    interpolate_lut,
    lut_lookup,
    merge_libraries,
    parse_liberty,
    read_liberty,
    write_liberty,
)

INV_7X7 = """
library (t) {
  lu_table_template (t7) {
    variable_1 : input_net_transition ;
    variable_2 : total_output_net_capacitance ;
    index_1 ("0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64") ;
    index_2 ("0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.064") ;
  }
  cell (INV) {
    pin (A) { direction : input ; capacitance : 0.002 ; }
    pin (Y) {
      direction : output ;
      timing () {
        related_pin : "A" ;
        cell_rise (t7) { values (%s) ; }
      }
    }
  }
}
"""


def _rows(n, m):
    return ", ".join('"' + ", ".join(str(0.1 * (i + j)) for j in range(m)) + '"' for i in range(n))


def test_minimal_inverter_has_one_arc_and_one_valid_table():
    lib = parse_liberty(INV_7X7 % _rows(7, 7), LATE)
    inv = lib["INV"]
    assert len(inv.arcs) == 1
    assert sum(inv.arcs[0].valid_flags) == 1
    assert inv.pins["A"].capacitance[2] == pytest.approx(0.002)
    assert inv.arcs[0].table("cell_rise", LATE).shape == (7, 7)


def test_literal_table_transcription():
    text = """library (t) { cell (B) {
      pin (A) { direction : input ; capacitance : 0.001 ; }
      pin (Y) { direction : output ; timing () { related_pin : "A" ;
        cell_rise (x) { index_1 ("0.01, 0.02") ; index_2 ("0.1, 0.2") ; values ("1,2","3,4") ; } } } } }"""
    lut = parse_liberty(text, LATE)["B"].arcs[0].table("cell_rise", LATE)
    assert lut == Lut([0.01, 0.02], [0.1, 0.2], [[1.0, 2.0], [3.0, 4.0]])


def test_value_count_mismatch_names_cell():
    with pytest.raises(StructuralError, match="INV"):
        parse_liberty(INV_7X7 % _rows(7, 6), LATE)


def test_unbalanced_braces_report_line():
    with pytest.raises(ParseError) as err:
        parse_liberty("library (x) {\n cell (A) {\n pin (Y) { direction : output ; }\n", LATE)
    assert err.value.line is not None


def test_missing_capacitance_defaults_to_zero_with_warning():
    text = """library (t) { cell (B) { pin (A) { direction : input ; } pin (Y) { direction : output ; } } }"""
    lib = parse_liberty(text, EARLY)
    assert lib["B"].pins["A"].capacitance == [0.0] * 4
    assert any("capacitance" in w for w in lib.warnings)


def test_mini_library(data_dir):
    late = read_liberty(data_dir / "mini_late.lib", LATE)
    early = read_liberty(data_dir / "mini_early.lib", EARLY)
    assert set(late) == {"INV", "NAND2", "CLKBUF", "DFF"}
    nand = late["NAND2"]
    # "A B" related pins expand to one arc per input
    assert sorted(a.related_input_pin for a in nand.arcs) == ["A", "B"]
    rise = nand.arcs[0].table("cell_rise", LATE)
    # load-first template is transposed to slew rows, load columns
    assert rise.index1 == [0.01, 0.5]
    assert rise.index2 == [0.001, 0.05, 0.1]
    assert rise.values == [[0.12, 0.20, 0.28], [0.22, 0.30, 0.38]]
    assert nand.pins["A"].capacitance[2:] == [0.0030, 0.0028]
    assert late["DFF"].clock_pins == ["CK"]
    assert early["INV"].arcs[0].table("cell_rise", EARLY).values[0][0] == pytest.approx(0.07)
    libs = LibrarySet(dict(early), dict(late))
    assert libs.missing(["INV", "XOR9"]) == ["XOR9"]


def test_merge_first_library_wins():
    a = parse_liberty(INV_7X7 % _rows(7, 7), LATE)
    b = parse_liberty((INV_7X7 % _rows(7, 7)).replace("capacitance : 0.002", "capacitance : 0.009"), LATE)
    merged = merge_libraries([a, b])
    assert merged["INV"].pins["A"].capacitance[2] == pytest.approx(0.002)


def test_interpolate_identity_is_exact():
    lut = Lut([0.1, 0.2, 0.4], [1.0, 2.0], [[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]])
    assert interpolate_lut(lut, 3, 2) == lut


def test_interpolate_2x2_to_3x3_center():
    lut = Lut([0.0, 1.0], [0.0, 1.0], [[0.0, 1.0], [1.0, 2.0]])
    out = interpolate_lut(lut, 3, 3)
    assert out.values[1][1] == pytest.approx(1.0)
    assert out.index1 == [0.0, 0.5, 1.0]


def test_constant_lookup_anywhere():
    lut = Lut([0.3], [0.7], [[5.0]])
    for x in (-100.0, 0.0, 0.3, 1e6):
        assert lut_lookup(lut, x, -x) == 5.0


def test_lookup_rejects_non_finite():
    with pytest.raises(ValueError):
        lut_lookup(Lut.constant(1.0), math.nan, 0.0)
    with pytest.raises(ValueError):
        lut_lookup(Lut.constant(1.0), 0.0, math.inf)


def test_extrapolation_is_linear_then_clamped():
    lut = Lut([0.0, 1.0], [0.0, 1.0], [[0.0, 1.0], [1.0, 2.0]])
    assert lut_lookup(lut, 2.0, 0.0) == pytest.approx(2.0)
    assert lut_lookup(lut, -1.0, 0.0) == pytest.approx(-1.0)
    # clamped at ten spans beyond the edge
    assert lut_lookup(lut, 1e9, 0.0) == pytest.approx(11.0)


def _affine(i1, i2):
    return Lut(i1, i2, [[2 * a + 3 * b for b in i2] for a in i1])


axis = st.lists(st.floats(0.0, 100.0, allow_nan=False), min_size=2, max_size=8, unique=True).map(sorted)


@settings(max_examples=200, deadline=None)
@given(axis, axis, st.integers(1, 9), st.integers(1, 9))
def test_affine_interpolation_property(i1, i2, r, c):
    if min(b - a for a, b in zip(i1, i1[1:])) < 1e-6 or min(b - a for a, b in zip(i2, i2[1:])) < 1e-6:
        return
    out = interpolate_lut(_affine(i1, i2), r, c)
    for a, row in zip(out.index1, out.values):
        for b, v in zip(out.index2, row):
            assert v == pytest.approx(2 * a + 3 * b, abs=1e-9)


def test_random_tables_grid_points_and_idempotence():
    rng = random.Random(7)
    for _ in range(300):
        lut = random_lut(rng)
        for i, x1 in enumerate(lut.index1):
            for j, x2 in enumerate(lut.index2):
                assert lut_lookup(lut, x1, x2) == pytest.approx(lut.values[i][j], abs=1e-12)
        r, c = rng.randint(1, 9), rng.randint(1, 9)
        once = interpolate_lut(lut, r, c)
        assert interpolate_lut(once, r, c) == once


def test_write_parse_round_trip():
    rng = random.Random(3)
    for _ in range(50):
        corner = rng.choice([EARLY, LATE])
        cells = random_library(rng, corner)
        assert dict(parse_liberty(write_liberty(cells, corner), corner)) == cells
