"""
Synthetic Fixtures
Smooth national-scale datasets for smoke tests and cross-checks

Every identity factor (e, p, g, s, k_u, w_u) moves linearly between its start and end
value, so the yearly states lie on one straight path and chained and endpoint
decompositions agree up to integration error. Emission factors are rescaled at both ends
so C/H hits the endpoint intensities exactly.

Fixtures are generated in code. The CLI only accepts `fixture:NAME` inputs when
DSD_SEED_FIXTURES is enabled.
"""
import math
from typing import Callable, Dict, Optional, Sequence, Tuple

from dsdkit.config import get_settings
from dsdkit.core.exceptions import FixtureError
from dsdkit.core.units import BASE_UNITS, KG_PER_KT
from dsdkit.models.dataset import Dataset, YearRecord
from dsdkit.services.dataset import dataset_csv

FIXTURE_PREFIX = "fixture:"

Pair = Tuple[float, float]

# Endpoint intensities, kgCO2 per household
CHINA_START_INTENSITY = 1125.0
CHINA_END_INTENSITY = 1492.0
INDIA_START_INTENSITY = 320.0
INDIA_END_INTENSITY = 560.0

# Household size (persons), GDP per capita and energy per expenditure (PJ per million currency)
CHINA_HOUSEHOLD_SIZE = (3.73, 2.77)
CHINA_GDP_PER_CAPITA = (7.9e-3, 4.0e-2)
CHINA_EXPENDITURE_SHARE = (0.46, 0.38)
CHINA_ENERGY_INTENSITY = (1.74e-3, 0.91e-3)

INDIA_HOUSEHOLD_SIZE = (5.42, 4.73)
INDIA_GDP_PER_CAPITA = (2.08e-2, 5.44e-2)
INDIA_EXPENDITURE_SHARE = (0.62, 0.56)
INDIA_ENERGY_INTENSITY = (4.77e-4, 2.23e-4)

# Start/end energy shares per end use (column order)
CHINA_SHARES = (
    (0.02, 0.06),
    (0.30, 0.28),
    (0.06, 0.05),
    (0.14, 0.15),
    (0.33, 0.24),
    (0.15, 0.22),
)
INDIA_SHARES = (
    (0.03, 0.09),
    (0.00, 0.00),
    (0.08, 0.07),
    (0.05, 0.06),
    (0.70, 0.56),
    (0.14, 0.22),
)

# Relative emission factor profiles (ktCO2/PJ before calibration)
CHINA_FACTORS = (
    (200.0, 160.0),
    (90.0, 80.0),
    (220.0, 170.0),
    (70.0, 65.0),
    (60.0, 55.0),
    (210.0, 165.0),
)
INDIA_FACTORS = (
    (230.0, 205.0),
    (0.0, 0.0),
    (240.0, 210.0),
    (80.0, 78.0),
    (40.0, 45.0),
    (235.0, 200.0),
)


def _lerp(pair: Pair, t: float) -> float:
    return pair[0] + (pair[1] - pair[0]) * t


def _factor_scale(
    target: float,
    household_size: float,
    gdp_per_capita: float,
    expenditure_share: float,
    energy_intensity: float,
    shares: Sequence[float],
    factors: Sequence[float]
) -> float:
    """Multiplier on relative factors (kt/PJ) giving intensity `target` in kg/household"""
    epgs = energy_intensity * household_size * gdp_per_capita * expenditure_share
    kw = math.fsum(k * w for k, w in zip(factors, shares))
    return target / (epgs * kw * KG_PER_KT)


def _linear_series(
    country: str,
    years: Sequence[int],
    population: Callable[[int], float],
    household_size: Pair,
    gdp_per_capita: Pair,
    expenditure_share: Pair,
    energy_intensity: Pair,
    shares: Sequence[Pair],
    factors: Sequence[Pair],
    intensity: Pair,
    floor_per_household: Optional[Callable[[int], float]] = None
) -> Dataset:
    """Records built from linearly moving factors, with C/H calibrated at both endpoints"""
    start_scale, end_scale = (
        _factor_scale(
            intensity[end],
            household_size[end],
            gdp_per_capita[end],
            expenditure_share[end],
            energy_intensity[end],
            [share[end] for share in shares],
            [k[end] for k in factors],
        )
        for end in (0, 1)
    )
    calibrated = [(k[0] * start_scale, k[1] * end_scale) for k in factors]

    span = years[-1] - years[0]
    records = []
    for step, year in enumerate(years):
        t = step / span if span else 0.0
        persons = population(step)
        households = persons / _lerp(household_size, t)
        gdp = persons * _lerp(gdp_per_capita, t)
        hce = gdp * _lerp(expenditure_share, t)
        total_energy = hce * _lerp(energy_intensity, t)
        energy = [total_energy * _lerp(share, t) for share in shares]
        records.append(YearRecord(
            year=year,
            population=persons,
            households=households,
            gdp=gdp,
            hce=hce,
            floor_area=households * floor_per_household(step) if floor_per_household else None,
            energy=tuple(energy),
            emissions=tuple(e * _lerp(k, t) for e, k in zip(energy, calibrated)),
        ))
    return Dataset(
        country=country,
        records=tuple(records),
        units=dict(BASE_UNITS),
        active_uses=Dataset.infer_active(records),
    )


def china_like() -> Dataset:
    """2000-2020 series from 1125 to 1492 kgCO2/household, floor area included"""
    return _linear_series(
        country="china_like",
        years=range(2000, 2021),
        population=lambda n: 1.2675e9 * 1.005 ** n,
        household_size=CHINA_HOUSEHOLD_SIZE,
        gdp_per_capita=CHINA_GDP_PER_CAPITA,
        expenditure_share=CHINA_EXPENDITURE_SHARE,
        energy_intensity=CHINA_ENERGY_INTENSITY,
        shares=CHINA_SHARES,
        factors=CHINA_FACTORS,
        intensity=(CHINA_START_INTENSITY, CHINA_END_INTENSITY),
        floor_per_household=lambda n: 60.0 + 1.5 * n,
    )


def india_like() -> Dataset:
    """2000-2020 series without space heating and without floor area"""
    return _linear_series(
        country="india_like",
        years=range(2000, 2021),
        population=lambda n: 1.057e9 * 1.015 ** n,
        household_size=INDIA_HOUSEHOLD_SIZE,
        gdp_per_capita=INDIA_GDP_PER_CAPITA,
        expenditure_share=INDIA_EXPENDITURE_SHARE,
        energy_intensity=INDIA_ENERGY_INTENSITY,
        shares=INDIA_SHARES,
        factors=INDIA_FACTORS,
        intensity=(INDIA_START_INTENSITY, INDIA_END_INTENSITY),
    )


def constant() -> Dataset:
    """2000-2005 with identical records every year"""
    record = dict(
        population=1.0e8,
        households=3.0e7,
        gdp=5.0e6,
        hce=2.5e6,
        floor_area=2.1e9,
        energy=(100.0, 900.0, 150.0, 400.0, 600.0, 350.0),
        emissions=(20.0, 85.0, 30.0, 28.0, 33.0, 70.0),
    )
    records = [YearRecord(year=year, **record) for year in range(2000, 2006)]
    return Dataset(
        country="constant",
        records=tuple(records),
        units=dict(BASE_UNITS),
        active_uses=Dataset.infer_active(records),
    )


# Create lookup dictionary
FIXTURES: Dict[str, Callable[[], Dataset]] = {
    "china_like": china_like,
    "india_like": india_like,
    "constant": constant,
}


def is_fixture_reference(path: str) -> bool:
    return str(path).startswith(FIXTURE_PREFIX)


def get_fixture(name: str) -> Dataset:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise FixtureError(f"unknown fixture '{name}'; expected one of {sorted(FIXTURES)}")


def fixture_csv(reference: str, enabled: Optional[bool] = None) -> bytes:
    """
    CSV bytes of a bundled fixture, for `fixture:NAME` inputs

    Args:
        reference: "fixture:NAME"
        enabled: Overrides settings.seed_fixtures

    Returns:
        Schema-ordered CSV in base units
    """
    enabled = get_settings().seed_fixtures if enabled is None else enabled
    if not enabled:
        raise FixtureError()
    name = reference[len(FIXTURE_PREFIX):] if is_fixture_reference(reference) else reference
    return dataset_csv(get_fixture(name)).encode("utf-8")
