"""
Decomposition Service
Yearly chains, stage aggregates, contribution rates and end-use breakdowns
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
import structlog

from dsdkit.core.enduses import END_USES
from dsdkit.core.exceptions import PreconditionError, YearRangeError
from dsdkit.core.monitoring import measure_latency
from dsdkit.models.dataset import Dataset
from dsdkit.models.results import (
    ContributionRates,
    DecompositionResult,
    EndUseBreakdown,
    IntegrationSettings,
    emission_factor_driver,
    share_shift_driver,
)
from dsdkit.services.dataset import interpolate_years
from dsdkit.services.engine import run_dsd

logger = structlog.get_logger(__name__)

DEFAULT_BREAKS = (2000, 2005, 2010, 2015, 2020)
RATE_GUARD = 1e-9


def _prepared(ds: Dataset, from_year: int, to_year: int) -> Dataset:
    if from_year >= to_year:
        raise YearRangeError(f"--from ({from_year}) must precede --to ({to_year})")
    if not ds.is_gap_free:
        ds = interpolate_years(ds)
    years = ds.years
    if from_year < years[0] or to_year > years[-1]:
        raise YearRangeError(
            f"years {from_year}-{to_year} outside dataset coverage {years[0]}-{years[-1]}"
        )
    return ds


@measure_latency
def chain_yearly(
    ds: Dataset,
    from_year: int,
    to_year: int,
    settings: Optional[IntegrationSettings] = None,
    workers: int = 1
) -> List[DecompositionResult]:
    """
    Decompose every consecutive year pair in [from_year, to_year]

    Args:
        ds: Dataset (interpolated when it has gaps)
        from_year: First year
        to_year: Last year
        settings: Integration settings, applied per year pair
        workers: Threads used to evaluate year pairs

    Returns:
        One result per year step, in year order
    """
    settings = settings or IntegrationSettings()
    ds = _prepared(ds, from_year, to_year)
    states = {year: ds.factor_state(year) for year in range(from_year, to_year + 1)}
    pairs = [(states[year], states[year + 1]) for year in range(from_year, to_year)]

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chain = list(pool.map(lambda pair: run_dsd(pair[0], pair[1], settings), pairs))
    else:
        chain = [run_dsd(start, end, settings) for start, end in pairs]

    logger.info("chain_completed", country=ds.country, intervals=len(chain), segments=settings.segments)
    return chain


def endpoint_decompose(
    ds: Dataset,
    from_year: int,
    to_year: int,
    settings: Optional[IntegrationSettings] = None
) -> DecompositionResult:
    """Single run from from_year to to_year"""
    ds = _prepared(ds, from_year, to_year)
    return run_dsd(ds.factor_state(from_year), ds.factor_state(to_year), settings)


def decompose_interval(
    ds: Dataset,
    from_year: int,
    to_year: int,
    settings: Optional[IntegrationSettings] = None,
    mode: str = "chain",
    workers: int = 1
) -> DecompositionResult:
    """Interval decomposition, chained yearly (summed) or endpoint"""
    if mode == "endpoint":
        return endpoint_decompose(ds, from_year, to_year, settings)
    if mode != "chain":
        raise PreconditionError(f"unknown mode '{mode}'")
    chain = chain_yearly(ds, from_year, to_year, settings, workers)
    return DecompositionResult.combine(chain, (from_year, to_year))


def aggregate_stages(
    chain: Sequence[DecompositionResult],
    breaks: Sequence[int] = DEFAULT_BREAKS
) -> List[DecompositionResult]:
    """
    Sum yearly results into stages bounded by consecutive breaks

    Args:
        chain: Yearly results in year order
        breaks: Sorted stage boundaries inside the chain coverage

    Returns:
        One aggregated result per stage
    """
    if not chain:
        raise PreconditionError("empty chain")
    breaks = list(breaks)
    if len(breaks) < 2:
        raise PreconditionError("at least two breaks are needed")
    for a, b in zip(breaks, breaks[1:]):
        if b == a:
            raise PreconditionError(f"empty stage at break {a}")
        if b < a:
            raise PreconditionError("breaks must be sorted ascending")

    first, last = chain[0].interval[0], chain[-1].interval[1]
    if breaks[0] < first or breaks[-1] > last:
        raise YearRangeError(f"breaks {breaks[0]}-{breaks[-1]} outside chain coverage {first}-{last}")

    stages = []
    for lo, hi in zip(breaks, breaks[1:]):
        members = [r for r in chain if r.interval[0] >= lo and r.interval[1] <= hi]
        if not members:
            raise PreconditionError(f"no yearly results inside stage {lo}-{hi}")
        stages.append(DecompositionResult.combine(members, (lo, hi)))
    return stages


def contribution_rates(r: DecompositionResult) -> ContributionRates:
    """Contribution rates in percent of Δc, absolute-only when Δc is degenerate"""
    scale = math.fsum(abs(x) for x in r.contributions)
    if abs(r.delta_c) > RATE_GUARD * scale:
        rates = tuple(100.0 * x / r.delta_c for x in r.contributions)
        return ContributionRates(delta_c=r.delta_c, rates=rates)
    return ContributionRates(delta_c=r.delta_c, rates=None)


def enduse_breakdown(r: DecompositionResult) -> EndUseBreakdown:
    """Per-end-use Δk and Δw contributions"""
    dk = []
    dw = []
    for use in END_USES:
        if use in r.active_uses:
            dk.append(r.contribution(emission_factor_driver(use)))
            dw.append(r.contribution(share_shift_driver(use)))
        else:
            dk.append(0.0)
            dw.append(0.0)
    return EndUseBreakdown(dk=tuple(dk), dw=tuple(dw))


def enduse_rates(breakdown: EndUseBreakdown, delta_c: float) -> Optional[Dict[str, Tuple[float, ...]]]:
    """Per-use Δk and Δw rates in percent of Δc, None when Δc is degenerate"""
    scale = math.fsum(abs(x) for x in breakdown.dk + breakdown.dw)
    if abs(delta_c) <= RATE_GUARD * scale or delta_c == 0.0:
        return None
    return {
        "dk": tuple(100.0 * x / delta_c for x in breakdown.dk),
        "dw": tuple(100.0 * x / delta_c for x in breakdown.dw),
    }


def compound_growth(first: float, last: float, periods: int) -> Optional[float]:
    """Compound average growth per period, None when undefined"""
    if periods <= 0 or first <= 0 or last <= 0:
        return None
    return (last / first) ** (1.0 / periods) - 1.0


def intensity_series(ds: Dataset, from_year: int, to_year: int) -> Tuple[pd.DataFrame, Optional[float]]:
    """
    Yearly carbon intensity with year-on-year growth

    Returns:
        Table (year, intensity, growth_rate) and the compound annual growth over the interval
    """
    ds = _prepared(ds, from_year, to_year)
    years = list(range(from_year, to_year + 1))
    intensity = [ds.factor_state(year).c for year in years]
    growth = [None] + [b / a - 1.0 for a, b in zip(intensity, intensity[1:])]
    table = pd.DataFrame({"year": years, "intensity": intensity, "growth_rate": growth})
    return table, compound_growth(intensity[0], intensity[-1], len(years) - 1)


def stage_breaks_for(from_year: int, to_year: int, breaks: Sequence[int] = DEFAULT_BREAKS) -> List[int]:
    """Configured breaks clipped to [from_year, to_year], endpoints included"""
    inner = [b for b in breaks if from_year < b < to_year]
    return [from_year, *inner, to_year]
