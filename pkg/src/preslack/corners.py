"""Analysis corners and the table kinds that feed each of them.

Four-corner quantities are always ordered (early-rise, early-fall,
late-rise, late-fall).
"""

from __future__ import annotations

CORNERS = ("ER", "EF", "LR", "LF")
ER, EF, LR, LF = range(4)

EARLY = "early"
LATE = "late"
ANALYSES = (EARLY, LATE)

TABLE_KINDS = ("cell_rise", "cell_fall", "rise_transition", "fall_transition")

# corner index -> (analysis, delay table kind, transition table kind)
CORNER_TABLES = {
    ER: (EARLY, "cell_rise", "rise_transition"),
    EF: (EARLY, "cell_fall", "fall_transition"),
    LR: (LATE, "cell_rise", "rise_transition"),
    LF: (LATE, "cell_fall", "fall_transition"),
}

# corner index -> (analysis, is_rise)
CORNER_SENSE = {ER: (EARLY, True), EF: (EARLY, False), LR: (LATE, True), LF: (LATE, False)}


def corner_index(name: str) -> int:
    try:
        return CORNERS.index(name.upper())
    except ValueError:
        raise ValueError(f"unknown corner {name!r}, expected one of {', '.join(CORNERS)}") from None


def is_early(corner: int) -> bool:
    return corner in (ER, EF)
