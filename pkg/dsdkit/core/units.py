"""
Unit conversion table
Every dimensional column is converted once, at load time, to its base unit
"""
from typing import Dict

from dsdkit.core.enduses import emission_columns, energy_columns
from dsdkit.core.exceptions import UnitError

# Base units
BASE_UNITS: Dict[str, str] = {
    "population": "persons",
    "households": "households",
    "gdp": "million_currency",
    "hce": "million_currency",
    "floor_area": "m2",
    **{column: "PJ" for column in energy_columns()},
    **{column: "ktCO2" for column in emission_columns()},
}

# Multipliers from input unit to base unit, per dimension
CONVERSIONS: Dict[str, Dict[str, float]] = {
    "persons": {
        "persons": 1.0,
        "thousand_persons": 1e3,
        "million_persons": 1e6,
    },
    "households": {
        "households": 1.0,
        "thousand_households": 1e3,
        "million_households": 1e6,
    },
    "currency": {
        "currency": 1e-6,
        "thousand_currency": 1e-3,
        "million_currency": 1.0,
        "billion_currency": 1e3,
        "trillion_currency": 1e6,
    },
    "area": {
        "m2": 1.0,
        "thousand_m2": 1e3,
        "million_m2": 1e6,
        "billion_m2": 1e9,
    },
    "energy": {
        "PJ": 1.0,
        "GJ": 1e-6,
        "TJ": 1e-3,
        "EJ": 1e3,
        "GWh": 3.6e-3,
        "TWh": 3.6,
        "ktce": 0.0293076,
        "Mtce": 29.3076,
        "ktoe": 0.041868,
        "Mtoe": 41.868,
    },
    "emissions": {
        "tCO2": 1e-3,
        "ktCO2": 1.0,
        "MtCO2": 1e3,
        "GtCO2": 1e6,
    },
}

COLUMN_DIMENSIONS: Dict[str, str] = {
    "population": "persons",
    "households": "households",
    "gdp": "currency",
    "hce": "currency",
    "floor_area": "area",
    **{column: "energy" for column in energy_columns()},
    **{column: "emissions" for column in emission_columns()},
}

DIMENSIONAL_COLUMNS = tuple(COLUMN_DIMENSIONS)

# Group keys accepted in unit declarations
GROUP_KEYS: Dict[str, tuple] = {
    "energy": tuple(energy_columns()),
    "emissions": tuple(emission_columns()),
}

# Base-unit reporting constants
KG_PER_KT = 1e6
KG_PER_MT = 1e9
THOUSAND_PER_MILLION = 1e3


def conversion_factor(column: str, unit: str) -> float:
    """Get multiplier converting `unit` to the base unit of `column`"""
    dimension = COLUMN_DIMENSIONS.get(column)
    if dimension is None:
        raise UnitError(column, unit)
    factor = CONVERSIONS[dimension].get(unit)
    if factor is None:
        raise UnitError(column, unit)
    return factor
