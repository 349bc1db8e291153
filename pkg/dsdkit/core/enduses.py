"""
Residential end uses
Six energy services in fixed column order
"""
from enum import Enum
from typing import Dict, List, Tuple


class EndUse(str, Enum):
    """Residential end uses; member order is the output column order"""
    SPACE_COOLING = "space_cooling"
    SPACE_HEATING = "space_heating"
    LIGHTING = "lighting"
    WATER_HEATING = "water_heating"
    COOKING = "cooking"
    APPLIANCES_OTHERS = "appliances_others"

    @property
    def position(self) -> int:
        return END_USE_INDEX[self]

    @property
    def energy_column(self) -> str:
        return f"energy_{self.value}"

    @property
    def emission_column(self) -> str:
        return f"emis_{self.value}"


END_USES: Tuple[EndUse, ...] = tuple(EndUse)
END_USE_COUNT = len(END_USES)

# Create lookup dictionaries
END_USE_INDEX: Dict[EndUse, int] = {use: i for i, use in enumerate(END_USES)}
END_USES_BY_LABEL: Dict[str, EndUse] = {use.value: use for use in END_USES}


def get_end_use(label: str) -> EndUse:
    """Get end use by label, raising KeyError with the valid labels"""
    try:
        return END_USES_BY_LABEL[label.strip().lower()]
    except KeyError:
        raise KeyError(f"unknown end use '{label}'; expected one of {list(END_USES_BY_LABEL)}")


def order_uses(uses) -> Tuple[EndUse, ...]:
    """Return the given end uses in canonical order"""
    wanted = set(uses)
    return tuple(use for use in END_USES if use in wanted)


def energy_columns() -> List[str]:
    return [use.energy_column for use in END_USES]


def emission_columns() -> List[str]:
    return [use.emission_column for use in END_USES]
