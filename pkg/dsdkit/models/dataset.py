"""Dataset models"""
import math
from dataclasses import dataclass, field
from typing import Annotated, Dict, Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dsdkit.core.enduses import END_USE_COUNT, END_USES, EndUse, order_uses
from dsdkit.core.exceptions import PreconditionError, UnitError
from dsdkit.core.units import BASE_UNITS, DIMENSIONAL_COLUMNS, GROUP_KEYS, conversion_factor

NonNegative = Annotated[float, Field(ge=0)]


class YearRecord(BaseModel):
    """One country-year of raw observations in base units"""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    year: int
    population: float = Field(gt=0)
    households: float = Field(gt=0)
    gdp: float = Field(gt=0)
    hce: float = Field(gt=0)
    floor_area: Optional[float] = Field(default=None, gt=0)
    energy: Tuple[NonNegative, ...] = Field(min_length=END_USE_COUNT, max_length=END_USE_COUNT)
    emissions: Tuple[NonNegative, ...] = Field(min_length=END_USE_COUNT, max_length=END_USE_COUNT)

    @model_validator(mode="after")
    def emissions_need_energy(self) -> "YearRecord":
        for use, energy, emissions in zip(END_USES, self.energy, self.emissions):
            if emissions > 0 and energy <= 0:
                raise ValueError(
                    f"{use.emission_column} > 0 requires {use.energy_column} > 0"
                )
        return self

    @property
    def total_energy(self) -> float:
        return math.fsum(self.energy)

    @property
    def total_emissions(self) -> float:
        return math.fsum(self.emissions)

    def energy_of(self, use: EndUse) -> float:
        return self.energy[use.position]

    def emissions_of(self, use: EndUse) -> float:
        return self.emissions[use.position]

    def to_row(self) -> Dict[str, Optional[float]]:
        """Flatten to CSV column names"""
        row: Dict[str, Optional[float]] = {
            "year": self.year,
            "population": self.population,
            "households": self.households,
            "gdp": self.gdp,
            "hce": self.hce,
            "floor_area": self.floor_area,
        }
        for use in END_USES:
            row[use.energy_column] = self.energy_of(use)
        for use in END_USES:
            row[use.emission_column] = self.emissions_of(use)
        return row


class UnitDeclaration(BaseModel):
    """Sidecar unit declaration: column (or group) -> input unit"""
    model_config = ConfigDict(frozen=True)

    country: Optional[str] = None
    units: Dict[str, str] = Field(default_factory=dict)

    @classmethod
    def base(cls, country: Optional[str] = None) -> "UnitDeclaration":
        return cls(country=country, units=dict(BASE_UNITS))

    def resolve(self) -> Dict[str, str]:
        """Expand group keys; explicit column keys win"""
        resolved: Dict[str, str] = {}
        for key, unit in self.units.items():
            for column in GROUP_KEYS.get(key, ()):
                resolved[column] = unit
        for key, unit in self.units.items():
            if key in GROUP_KEYS:
                continue
            if key not in BASE_UNITS:
                raise UnitError(key, unit)
            resolved[key] = unit
        for column in DIMENSIONAL_COLUMNS:
            if column not in resolved:
                raise UnitError(column)
        return resolved

    def factors(self) -> Dict[str, float]:
        """Multiplier per column from declared to base unit"""
        return {column: conversion_factor(column, unit) for column, unit in self.resolve().items()}


@dataclass(frozen=True)
class Dataset:
    """Country time series normalized to base units"""
    country: str
    records: Tuple[YearRecord, ...]
    units: Dict[str, str] = field(default_factory=dict)
    active_uses: Tuple[EndUse, ...] = ()

    @property
    def years(self) -> Tuple[int, ...]:
        return tuple(record.year for record in self.records)

    @property
    def has_floor_area(self) -> bool:
        return all(record.floor_area is not None for record in self.records)

    @property
    def is_gap_free(self) -> bool:
        years = self.years
        return all(b - a == 1 for a, b in zip(years, years[1:]))

    def record(self, year: int) -> YearRecord:
        for record in self.records:
            if record.year == year:
                return record
        raise KeyError(year)

    def factor_state(self, year: int) -> "FactorState":
        """Factor state for a year, with emission factors of zero-energy uses carried"""
        from dsdkit.services.dataset import dataset_factor_state
        return dataset_factor_state(self, year)

    def to_frame(self) -> pd.DataFrame:
        """Records as a DataFrame with the CSV schema columns"""
        return pd.DataFrame([record.to_row() for record in self.records])

    @staticmethod
    def infer_active(records: Iterable[YearRecord]) -> Tuple[EndUse, ...]:
        records = list(records)
        return order_uses(
            use for use in END_USES
            if any(record.energy_of(use) > 0 for record in records)
        )


@dataclass(frozen=True)
class FactorState:
    """Identity state c = e·p·g·s·Σ k_u·w_u at one point of the integration path"""
    e_i: Tuple[float, ...]
    e: float
    k: Tuple[float, ...]
    w: Tuple[float, ...]
    p: float
    g: float
    s: float
    c: float
    active: Tuple[EndUse, ...]
    year: Optional[int] = None

    @classmethod
    def from_factors(
        cls,
        e: float,
        p: float,
        g: float,
        s: float,
        k: Iterable[float],
        w: Iterable[float],
        active: Optional[Iterable[EndUse]] = None,
        year: Optional[int] = None
    ) -> "FactorState":
        """Build a state from its exogenous factors; e_i and c follow from the identity"""
        k = tuple(float(x) for x in k)
        w = tuple(float(x) for x in w)
        if len(k) != END_USE_COUNT or len(w) != END_USE_COUNT:
            raise PreconditionError(f"k and w need {END_USE_COUNT} entries")
        if active is None:
            active = order_uses(use for use in END_USES if w[use.position] > 0 or k[use.position] > 0)
        active = order_uses(active)
        mask = [use in active for use in END_USES]
        k = tuple(x if on else 0.0 for x, on in zip(k, mask))
        w = tuple(x if on else 0.0 for x, on in zip(w, mask))
        state = cls(
            e_i=tuple(e * x for x in w),
            e=float(e),
            k=k,
            w=w,
            p=float(p),
            g=float(g),
            s=float(s),
            c=float(e * p * g * s * math.fsum(a * b for a, b in zip(k, w))),
            active=active,
            year=year,
        )
        state.check_invariants()
        return state

    @property
    def active_mask(self) -> np.ndarray:
        return np.array([use in self.active for use in END_USES])

    def identity_value(self) -> float:
        return self.e * self.p * self.g * self.s * math.fsum(a * b for a, b in zip(self.k, self.w))

    def check_invariants(self) -> None:
        values = [self.e, self.p, self.g, self.s, self.c, *self.e_i, *self.k, *self.w]
        if not all(math.isfinite(v) for v in values):
            raise PreconditionError("factor state has non-finite fields")
        if any(v < 0 for v in values):
            raise PreconditionError("factor state has negative fields")
        if min(self.p, self.g, self.s, self.e) <= 0:
            raise PreconditionError("p, g, s and e must be strictly positive")
        if not self.active:
            raise PreconditionError("factor state has no active end uses")
        if abs(math.fsum(self.w) - 1.0) > 1e-9:
            raise PreconditionError(f"shares sum to {math.fsum(self.w)!r}, expected 1")
        if abs(self.c - self.identity_value()) > 1e-9 * abs(self.c):
            raise PreconditionError("carbon intensity does not match the factor identity")
        for use in self.active:
            i = use.position
            if abs(self.e * self.w[i] - self.e_i[i]) > 1e-9 * max(abs(self.e_i[i]), 1e-300):
                raise PreconditionError(f"e·w != e_i for {use.value}")
