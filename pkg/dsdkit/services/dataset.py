"""
Dataset Service
CSV ingestion, unit normalization, year interpolation and factor-state derivation
"""
import io
import math
from pathlib import Path
from typing import BinaryIO, Dict, List, Mapping, Optional, Union

import pandas as pd
import structlog
from pydantic import ValidationError

from dsdkit.core.enduses import END_USES, EndUse, emission_columns, energy_columns, order_uses
from dsdkit.core.exceptions import (
    DatasetValidationError,
    DegenerateStateError,
    InputError,
    ParseError,
    PreconditionError,
    SchemaError,
)
from dsdkit.core.units import KG_PER_KT
from dsdkit.models.dataset import Dataset, FactorState, UnitDeclaration, YearRecord

logger = structlog.get_logger(__name__)

CSV_COLUMNS: List[str] = [
    "year",
    "population",
    "households",
    "gdp",
    "hce",
    "floor_area",
    *energy_columns(),
    *emission_columns(),
]

Source = Union[bytes, str, Path, BinaryIO]


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    return source.read()


def load_units(path: Union[str, Path, None], country: Optional[str] = None) -> UnitDeclaration:
    """Load a JSON unit declaration, or base units when no sidecar is given"""
    if path is None:
        return UnitDeclaration.base(country)
    try:
        return UnitDeclaration.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as e:
        raise InputError(f"{path}: invalid unit declaration: {e.errors()[0]['msg']}")
    except OSError as e:
        raise InputError(f"{path}: cannot read unit declaration: {e.strerror}")


def _check_header(columns: List[str]) -> None:
    seen = set()
    for column in columns:
        if column in seen:
            raise SchemaError(column, f"schema error: duplicate column '{column}'")
        seen.add(column)
    for column in CSV_COLUMNS:
        if column not in seen:
            raise SchemaError(column, f"schema error: missing column '{column}'")
    for column in columns:
        if column not in CSV_COLUMNS:
            raise SchemaError(column, f"schema error: unknown column '{column}'")
    if columns != CSV_COLUMNS:
        raise SchemaError(columns[0], "schema error: columns are not in schema order")


def _parse_cell(raw: str, row: int, column: str, source_name: str) -> Optional[float]:
    text = raw.strip()
    if text == "":
        if column == "floor_area":
            return None
        raise ParseError(row, column, raw, source_name)
    try:
        value = float(text)
    except ValueError:
        raise ParseError(row, column, raw, source_name)
    if not math.isfinite(value):
        raise ParseError(row, column, raw, source_name)
    return value


def _parse_year(raw: str, row: int, source_name: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise ParseError(row, "year", raw, source_name)


def _validation_column(error: dict) -> Optional[str]:
    loc = error.get("loc", ())
    if not loc:
        return None
    if loc[0] == "energy" and len(loc) > 1:
        return END_USES[loc[1]].energy_column
    if loc[0] == "emissions" and len(loc) > 1:
        return END_USES[loc[1]].emission_column
    return str(loc[0])


def _build_record(values: Mapping[str, Optional[float]], year: int, row: Optional[int]) -> YearRecord:
    try:
        return YearRecord(
            year=year,
            population=values["population"],
            households=values["households"],
            gdp=values["gdp"],
            hce=values["hce"],
            floor_area=values["floor_area"],
            energy=tuple(values[column] for column in energy_columns()),
            emissions=tuple(values[column] for column in emission_columns()),
        )
    except ValidationError as e:
        error = e.errors()[0]
        raise DatasetValidationError(
            f"year {year}: {error['msg']}", row=row, column=_validation_column(error)
        )


def load_dataset(
    source: Source,
    unit_config: Optional[UnitDeclaration] = None,
    country: Optional[str] = None,
    source_name: str = "<input>"
) -> Dataset:
    """
    Load and normalize a country time series

    Args:
        source: CSV bytes, path or binary stream
        unit_config: Declared input units (base units when omitted)
        country: Country label (falls back to the unit declaration, then the source name)
        source_name: Name used in error messages

    Returns:
        Dataset in base units with active end uses inferred
    """
    unit_config = unit_config or UnitDeclaration.base()
    factors = unit_config.factors()

    data = _read_bytes(source)
    try:
        frame = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f"{source_name}: cannot read CSV: {e}")
    _check_header([str(column).strip() for column in frame.columns])

    records: List[YearRecord] = []
    rows: Dict[int, int] = {}
    for position, raw in enumerate(frame.itertuples(index=False), start=1):
        cells = dict(zip(CSV_COLUMNS, raw))
        year = _parse_year(cells["year"], position, source_name)
        if year in rows:
            raise DatasetValidationError(
                f"duplicate year {year} (first seen in row {rows[year]})", row=position, column="year"
            )
        rows[year] = position
        values = {}
        for column in CSV_COLUMNS[1:]:
            value = _parse_cell(cells[column], position, column, source_name)
            values[column] = None if value is None else value * factors[column]
        records.append(_build_record(values, year, position))

    if not records:
        raise InputError(f"{source_name}: no data rows")
    records.sort(key=lambda record: record.year)
    dataset = Dataset(
        country=country or unit_config.country or Path(source_name).stem,
        records=tuple(records),
        units=unit_config.resolve(),
        active_uses=Dataset.infer_active(records),
    )
    logger.info(
        "dataset_loaded",
        source=source_name,
        records=len(records),
        active_uses=[use.value for use in dataset.active_uses],
    )
    return dataset


def dataset_csv(ds: Dataset) -> str:
    """Dataset as schema-ordered CSV text; floats use repr so reloading is bit-exact"""
    lines = [",".join(CSV_COLUMNS)]
    for record in ds.records:
        row = record.to_row()
        cells = []
        for column in CSV_COLUMNS:
            value = row[column]
            if value is None:
                cells.append("")
            elif column == "year":
                cells.append(str(int(value)))
            else:
                cells.append(repr(float(value)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def save_dataset(ds: Dataset, path: Union[str, Path]) -> Path:
    """
    Write a normalized dataset in base units plus a base-unit sidecar

    Returns:
        Path of the unit sidecar
    """
    path = Path(path)
    path.write_text(dataset_csv(ds), encoding="utf-8")

    units_path = path.with_suffix(".units.json")
    units_path.write_text(
        UnitDeclaration.base(ds.country).model_dump_json(indent=2), encoding="utf-8"
    )
    return units_path


def interpolate_years(ds: Dataset) -> Dataset:
    """Fill missing interior years by linear interpolation of each raw column"""
    if len(ds.records) < 2:
        raise PreconditionError("interpolation needs at least two records")
    if ds.is_gap_free:
        return ds

    frame = ds.to_frame().set_index("year").astype(float)
    years = range(ds.years[0], ds.years[-1] + 1)
    filled = frame.reindex(years).interpolate(method="index", limit_area="inside")

    existing = set(ds.years)
    records = list(ds.records)
    for year in years:
        if year in existing:
            continue
        row = filled.loc[year].to_dict()
        before = max(y for y in existing if y < year)
        after = min(y for y in existing if y > year)
        if pd.isna(frame.loc[before, "floor_area"]) or pd.isna(frame.loc[after, "floor_area"]):
            row["floor_area"] = None
        records.append(_build_record(row, year, None))

    records.sort(key=lambda record: record.year)
    logger.info("years_interpolated", filled=len(records) - len(ds.records))
    return Dataset(
        country=ds.country,
        records=tuple(records),
        units=ds.units,
        active_uses=ds.active_uses,
    )


def derive_factor_state(
    r: YearRecord,
    active,
    fallback_k: Optional[Mapping[EndUse, float]] = None,
    intensity_scale: float = KG_PER_KT
) -> FactorState:
    """
    Derive the identity state of one record

    Args:
        r: Record in base units
        active: Active end uses
        fallback_k: Emission factors for active uses with zero energy in this record
        intensity_scale: Emission-unit multiplier (kg per kt by default, so c is kg per household)

    Returns:
        FactorState with c = C/H = e·p·g·s·Σ k·w
    """
    active = order_uses(active)
    if not active:
        raise PreconditionError("active end-use set is empty")

    total_energy = math.fsum(r.energy_of(use) for use in active)
    if total_energy <= 0:
        raise DegenerateStateError(r.year)
    total_emissions = math.fsum(r.emissions_of(use) for use in active)

    e_i, k, w = [], [], []
    for use in END_USES:
        energy = r.energy_of(use)
        if use not in active:
            e_i.append(0.0)
            k.append(0.0)
            w.append(0.0)
            continue
        e_i.append(energy / r.hce)
        w.append(energy / total_energy)
        if energy > 0:
            k.append(r.emissions_of(use) * intensity_scale / energy)
        else:
            k.append(float((fallback_k or {}).get(use, 0.0)))

    state = FactorState(
        e_i=tuple(e_i),
        e=total_energy / r.hce,
        k=tuple(k),
        w=tuple(w),
        p=r.population / r.households,
        g=r.gdp / r.population,
        s=r.hce / r.gdp,
        c=total_emissions * intensity_scale / r.households,
        active=active,
        year=r.year,
    )
    state.check_invariants()
    return state


def carried_emission_factors(ds: Dataset, year: int, intensity_scale: float = KG_PER_KT) -> Dict[EndUse, float]:
    """Emission factors for active uses with zero energy in `year`, from the nearest year with energy"""
    record = ds.record(year)
    carried: Dict[EndUse, float] = {}
    for use in ds.active_uses:
        if record.energy_of(use) > 0:
            continue
        donors = [other for other in ds.records if other.energy_of(use) > 0]
        donor = min(donors, key=lambda other: (abs(other.year - year), other.year))
        carried[use] = donor.emissions_of(use) * intensity_scale / donor.energy_of(use)
    return carried


def dataset_factor_state(ds: Dataset, year: int, intensity_scale: float = KG_PER_KT) -> FactorState:
    """Factor state of one dataset year with the zero-energy carry rule applied"""
    try:
        record = ds.record(year)
    except KeyError:
        raise PreconditionError(f"year {year} not in dataset")
    return derive_factor_state(
        record,
        ds.active_uses,
        fallback_k=carried_emission_factors(ds, year, intensity_scale),
        intensity_scale=intensity_scale,
    )


def factor_table(ds: Dataset) -> pd.DataFrame:
    """Factor states of every year as a wide table"""
    rows = []
    for year in ds.years:
        state = ds.factor_state(year)
        row = {"year": year, "c": state.c, "e": state.e, "p": state.p, "g": state.g, "s": state.s}
        for use in END_USES:
            row[f"e_i:{use.value}"] = state.e_i[use.position]
            row[f"k:{use.value}"] = state.k[use.position]
            row[f"w:{use.value}"] = state.w[use.position]
        rows.append(row)
    return pd.DataFrame(rows)
