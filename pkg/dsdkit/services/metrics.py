"""
Metrics Service
Decarbonization totals, efficiency and per-household/capita/floor-area/expenditure scales

Decarbonization is reconstructed as avoided emissions: the negative driver contributions of a
one-year step (kgCO2 per household) times the households of the step's end year. Efficiency is
the avoided share of the counterfactual total, D / (C + D).
"""
import math
from itertools import accumulate
from typing import Dict, Iterable, List, Optional, Sequence

import structlog

from dsdkit.core.exceptions import PreconditionError, UnsupportedScaleError
from dsdkit.core.units import KG_PER_MT, THOUSAND_PER_MILLION
from dsdkit.models.dataset import Dataset, YearRecord
from dsdkit.models.results import (
    DRIVERS,
    DecarbSeries,
    DecompositionResult,
    DriverKind,
    ScaleSummary,
)
from dsdkit.services.dataset import interpolate_years
from dsdkit.services.decomposition import DEFAULT_BREAKS, compound_growth

logger = structlog.get_logger(__name__)

SCALES = ("per_household", "per_capita", "per_floor_area", "per_expenditure")
NEGATIVE_DRIVER_SETS = {
    "all": frozenset(DriverKind),
    "intensity-factor": frozenset({DriverKind.ENERGY_INTENSITY, DriverKind.EMISSION_FACTOR}),
}
DEFINITION = (
    "reconstructed: D_t = sum of |negative driver contributions| (kgCO2/household) x households "
    "at the step end year; efficiency = D_t / (C_t + D_t)"
)


def _driver_kinds(negative_drivers: str) -> frozenset:
    try:
        return NEGATIVE_DRIVER_SETS[negative_drivers]
    except KeyError:
        raise PreconditionError(
            f"unknown negative-driver set '{negative_drivers}'; expected one of {sorted(NEGATIVE_DRIVER_SETS)}"
        )


def avoided_intensity(yearly: DecompositionResult, negative_drivers: str = "all") -> float:
    """Sum of |negative contributions| over the selected drivers, kgCO2 per household"""
    kinds = _driver_kinds(negative_drivers)
    return math.fsum(
        -value for driver, value in zip(DRIVERS, yearly.contributions)
        if value < 0 and driver.kind in kinds
    )


def annual_decarbonization(
    yearly: DecompositionResult,
    record_end: YearRecord,
    negative_drivers: str = "all"
) -> float:
    """Decarbonization of one year step in MtCO2"""
    if yearly.interval[1] != record_end.year:
        raise PreconditionError(
            f"result ends in {yearly.interval[1]} but the record is for {record_end.year}"
        )
    return avoided_intensity(yearly, negative_drivers) * record_end.households / KG_PER_MT


def decarbonization_efficiency(decarbonization: float, emissions: float) -> float:
    """Avoided share of the counterfactual total, D / (C + D)"""
    if emissions <= 0:
        raise PreconditionError(f"emissions must be positive, got {emissions}")
    if decarbonization < 0:
        raise PreconditionError(f"decarbonization must be non-negative, got {decarbonization}")
    return decarbonization / (emissions + decarbonization)


def total_emissions(record: YearRecord) -> float:
    """Total emissions of a record in MtCO2"""
    return record.total_emissions / 1e3


def _stage_shares(years: Sequence[int], values: Sequence[float], breaks: Sequence[int]) -> Dict[str, float]:
    total = math.fsum(values)
    if total <= 0 or len(breaks) < 2:
        return {}
    shares = {}
    for lo, hi in zip(breaks, breaks[1:]):
        stage = math.fsum(v for year, v in zip(years, values) if lo < year <= hi)
        shares[f"{lo}-{hi}"] = 100.0 * stage / total
    return shares


def _summary(years: Sequence[int], values: Sequence[float], breaks: Sequence[int]) -> ScaleSummary:
    return ScaleSummary(
        mean=math.fsum(values) / len(values),
        annual_growth=compound_growth(values[0], values[-1], len(values) - 1),
        stage_shares=_stage_shares(years, values, breaks),
    )


def scale_series(
    chain: Sequence[DecompositionResult],
    ds: Dataset,
    scales: Optional[Iterable[str]] = None,
    negative_drivers: str = "all",
    breaks: Sequence[int] = DEFAULT_BREAKS
) -> DecarbSeries:
    """
    Yearly decarbonization scales from a chained decomposition

    Args:
        chain: Yearly results in year order
        ds: Dataset the chain was computed from
        scales: Requested per-X scales (all available when omitted)
        negative_drivers: "all" or "intensity-factor"
        breaks: Stage boundaries for the phased shares

    Returns:
        DecarbSeries with per-year values, cumulative total and stage shares
    """
    if not chain:
        raise PreconditionError("empty chain")
    requested = set(scales) if scales is not None else None
    if requested is not None:
        unknown = requested - set(SCALES)
        if unknown:
            raise UnsupportedScaleError(sorted(unknown)[0], f"expected one of {list(SCALES)}")
    if not ds.is_gap_free:
        ds = interpolate_years(ds)

    years: List[int] = []
    records: List[YearRecord] = []
    for result in chain:
        year = result.interval[1]
        try:
            records.append(ds.record(year))
        except KeyError:
            raise PreconditionError(f"chain year {year} not in dataset")
        years.append(year)

    floor_area_available = all(record.floor_area is not None for record in records)
    if requested is not None and "per_floor_area" in requested and not floor_area_available:
        missing = [r.year for r in records if r.floor_area is None]
        raise UnsupportedScaleError("per_floor_area", f"floor area absent for years {missing}")

    decarbonization = [
        annual_decarbonization(result, record, negative_drivers)
        for result, record in zip(chain, records)
    ]
    emissions = [total_emissions(record) for record in records]
    efficiency = [decarbonization_efficiency(d, c) for d, c in zip(decarbonization, emissions)]
    avoided_kg = [d * KG_PER_MT for d in decarbonization]
    per_household = [kg / r.households for kg, r in zip(avoided_kg, records)]
    per_capita = [kg / r.population for kg, r in zip(avoided_kg, records)]
    per_expenditure = [kg / (r.hce * THOUSAND_PER_MILLION) for kg, r in zip(avoided_kg, records)]
    per_floor_area = (
        [kg / r.floor_area for kg, r in zip(avoided_kg, records)] if floor_area_available else None
    )

    cumulative = list(accumulate(decarbonization))

    summaries = {
        "decarbonization_mt": _summary(years, decarbonization, breaks),
        "efficiency": _summary(years, efficiency, breaks),
        "per_household": _summary(years, per_household, breaks),
        "per_capita": _summary(years, per_capita, breaks),
        "per_expenditure": _summary(years, per_expenditure, breaks),
    }
    if per_floor_area is not None:
        summaries["per_floor_area"] = _summary(years, per_floor_area, breaks)

    logger.info(
        "scales_computed",
        country=ds.country,
        years=len(years),
        cumulative_mt=cumulative[-1],
        negative_drivers=negative_drivers,
    )
    return DecarbSeries(
        years=tuple(years),
        decarbonization_mt=tuple(decarbonization),
        emissions_mt=tuple(emissions),
        efficiency=tuple(efficiency),
        per_household=tuple(per_household),
        per_capita=tuple(per_capita),
        per_expenditure=tuple(per_expenditure),
        per_floor_area=tuple(per_floor_area) if per_floor_area is not None else None,
        cumulative_mt=tuple(cumulative),
        stage_shares=_stage_shares(years, decarbonization, breaks),
        summaries=summaries,
        negative_drivers=negative_drivers,
        definition=DEFINITION,
    )
