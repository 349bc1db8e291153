"""
Decomposition result models
Driver identifiers, integration settings and the reporting shapes built from engine runs
"""
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dsdkit.core.enduses import END_USE_COUNT, END_USES, EndUse


class DriverKind(str, Enum):
    """Driver families of the intensity identity"""
    ENERGY_INTENSITY = "energy_intensity"
    HOUSEHOLD_SIZE = "household_size"
    GDP_PER_CAPITA = "gdp_per_capita"
    EXPENDITURE_SHARE = "expenditure_share"
    EMISSION_FACTOR = "emission_factor"
    SHARE_SHIFT = "share_shift"


SCALAR_KINDS = (
    DriverKind.ENERGY_INTENSITY,
    DriverKind.HOUSEHOLD_SIZE,
    DriverKind.GDP_PER_CAPITA,
    DriverKind.EXPENDITURE_SHARE,
)


@dataclass(frozen=True)
class DriverId:
    """One of the 16 exogenous drivers"""
    kind: DriverKind
    end_use: Optional[EndUse] = None

    @property
    def label(self) -> str:
        if self.end_use is None:
            return self.kind.value
        return f"{self.kind.value}:{self.end_use.value}"

    def __str__(self) -> str:
        return self.label


DRIVERS: Tuple[DriverId, ...] = (
    *(DriverId(kind) for kind in SCALAR_KINDS),
    *(DriverId(DriverKind.EMISSION_FACTOR, use) for use in END_USES),
    *(DriverId(DriverKind.SHARE_SHIFT, use) for use in END_USES),
)
DRIVER_COUNT = len(DRIVERS)
DRIVER_INDEX: Dict[DriverId, int] = {driver: i for i, driver in enumerate(DRIVERS)}

# Column offsets in the exogenous vector z
E_COL, P_COL, G_COL, S_COL = 0, 1, 2, 3
K_COLS = slice(4, 4 + END_USE_COUNT)
F_COLS = slice(4 + END_USE_COUNT, 4 + 2 * END_USE_COUNT)


def emission_factor_driver(use: EndUse) -> DriverId:
    return DriverId(DriverKind.EMISSION_FACTOR, use)


def share_shift_driver(use: EndUse) -> DriverId:
    return DriverId(DriverKind.SHARE_SHIFT, use)


class SlackScheme(str, Enum):
    """How the slack component dF is spread over active shares"""
    UNIFORM = "uniform"
    PROPORTIONAL = "proportional"


class IntegrationSettings(BaseModel):
    """Euler integration settings"""
    model_config = ConfigDict(frozen=True)

    segments: int = Field(default=16000, ge=1)
    slack: SlackScheme = SlackScheme.UNIFORM
    chunk_segments: int = Field(default=65536, ge=1)


@dataclass(frozen=True)
class SystemMatrices:
    """A·dy = B·dz with y = (c, F_slack) and z the 16 drivers"""
    A: np.ndarray
    B: np.ndarray

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.A))


@dataclass(frozen=True)
class DecompositionResult:
    """Per-driver contributions to the carbon intensity change over an interval"""
    interval: Tuple[Optional[int], Optional[int]]
    delta_c: float
    contributions: Tuple[float, ...]
    settings: IntegrationSettings
    active_uses: Tuple[EndUse, ...]
    method: str = "dsd"
    start_c: Optional[float] = None
    end_c: Optional[float] = None
    integrated_delta_c: Optional[float] = None
    euler_residual: float = 0.0
    slack_total: float = 0.0
    max_slack_abs: float = 0.0
    max_closure_residual: float = 0.0
    final_shares: Optional[Tuple[float, ...]] = None

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.contributions, dtype=float)

    def contribution(self, driver: DriverId) -> float:
        return self.contributions[DRIVER_INDEX[driver]]

    def as_dict(self) -> Dict[str, float]:
        return {driver.label: value for driver, value in zip(DRIVERS, self.contributions)}

    def kind_total(self, kind: DriverKind) -> float:
        """Sum over the drivers of one family (Δk_DSD, Δw_DSD, ...)"""
        return math.fsum(
            value for driver, value in zip(DRIVERS, self.contributions) if driver.kind == kind
        )

    def additivity_gap(self) -> float:
        return abs(math.fsum(self.contributions) - self.delta_c)

    @classmethod
    def combine(
        cls,
        results: Sequence["DecompositionResult"],
        interval: Optional[Tuple[Optional[int], Optional[int]]] = None
    ) -> "DecompositionResult":
        """Elementwise sum of consecutive results"""
        if not results:
            raise ValueError("cannot combine an empty result list")
        first, last = results[0], results[-1]
        contributions = tuple(
            math.fsum(result.contributions[i] for result in results) for i in range(DRIVER_COUNT)
        )
        return replace(
            first,
            interval=interval or (first.interval[0], last.interval[1]),
            delta_c=math.fsum(result.delta_c for result in results),
            contributions=contributions,
            method="aggregate" if len(results) > 1 else first.method,
            end_c=last.end_c,
            integrated_delta_c=math.fsum(
                result.integrated_delta_c or 0.0 for result in results
            ),
            euler_residual=math.fsum(result.euler_residual for result in results),
            slack_total=math.fsum(result.slack_total for result in results),
            max_slack_abs=max(result.max_slack_abs for result in results),
            max_closure_residual=max(result.max_closure_residual for result in results),
            final_shares=last.final_shares,
        )


@dataclass(frozen=True)
class ContributionRates:
    """Contribution rates in percent of Δc, or an absolute-only marker"""
    delta_c: float
    rates: Optional[Tuple[float, ...]]

    @property
    def absolute_only(self) -> bool:
        return self.rates is None

    def as_dict(self) -> Optional[Dict[str, float]]:
        if self.rates is None:
            return None
        return {driver.label: value for driver, value in zip(DRIVERS, self.rates)}

    def rate(self, driver: DriverId) -> Optional[float]:
        if self.rates is None:
            return None
        return self.rates[DRIVER_INDEX[driver]]


@dataclass(frozen=True)
class EndUseBreakdown:
    """Per-end-use emission-factor (dk) and structure (dw) contributions"""
    dk: Tuple[float, ...]
    dw: Tuple[float, ...]

    @property
    def total_dk(self) -> float:
        return math.fsum(self.dk)

    @property
    def total_dw(self) -> float:
        return math.fsum(self.dw)

    def for_use(self, use: EndUse) -> Tuple[float, float]:
        return self.dk[use.position], self.dw[use.position]


@dataclass(frozen=True)
class ScaleSummary:
    """Mean level and compound annual growth of one scale over the series"""
    mean: float
    annual_growth: Optional[float]
    stage_shares: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class DecarbSeries:
    """Yearly decarbonization totals, efficiency and per-X scales"""
    years: Tuple[int, ...]
    decarbonization_mt: Tuple[float, ...]
    emissions_mt: Tuple[float, ...]
    efficiency: Tuple[float, ...]
    per_household: Tuple[float, ...]
    per_capita: Tuple[float, ...]
    per_expenditure: Tuple[float, ...]
    per_floor_area: Optional[Tuple[float, ...]]
    cumulative_mt: Tuple[float, ...]
    stage_shares: Dict[str, float]
    summaries: Dict[str, ScaleSummary]
    negative_drivers: str
    definition: str

    @property
    def total_mt(self) -> float:
        return self.cumulative_mt[-1] if self.cumulative_mt else 0.0

    @property
    def overall_efficiency(self) -> float:
        """Avoided share of the cumulative counterfactual total"""
        avoided = math.fsum(self.decarbonization_mt)
        return avoided / (math.fsum(self.emissions_mt) + avoided)

    def columns(self) -> Dict[str, Tuple[float, ...]]:
        columns = {
            "decarbonization_mt": self.decarbonization_mt,
            "emissions_mt": self.emissions_mt,
            "efficiency": self.efficiency,
            "per_household": self.per_household,
            "per_capita": self.per_capita,
            "per_expenditure": self.per_expenditure,
        }
        if self.per_floor_area is not None:
            columns["per_floor_area"] = self.per_floor_area
        columns["cumulative_mt"] = self.cumulative_mt
        return columns


class RunManifest(BaseModel):
    """Provenance embedded in every output artifact"""
    model_config = ConfigDict(frozen=True)

    command: str
    input_path: Optional[str] = None
    settings: Dict[str, object] = Field(default_factory=dict)
    toolkit_version: str
    input_digest: Optional[str] = None

    def to_comment_lines(self) -> List[str]:
        payload = self.model_dump(mode="json")
        return [f"# {key}: {json.dumps(payload[key], sort_keys=True)}" for key in payload]


def from_mapping(values: Dict[DriverId, float]) -> Tuple[float, ...]:
    vector = [0.0] * DRIVER_COUNT
    for driver, value in values.items():
        vector[DRIVER_INDEX[driver]] = float(value)
    return tuple(vector)
