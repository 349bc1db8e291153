"""Dataset loading, normalization, interpolation and factor derivation"""
import math

import pytest

from dsdkit.core.enduses import END_USES, EndUse
from dsdkit.core.exceptions import (
    DatasetValidationError,
    DegenerateStateError,
    InputError,
    ParseError,
    PreconditionError,
    SchemaError,
    UnitError,
)
from dsdkit.models.dataset import FactorState, UnitDeclaration, YearRecord
from dsdkit.services.dataset import (
    CSV_COLUMNS,
    dataset_csv,
    derive_factor_state,
    factor_table,
    interpolate_years,
    load_dataset,
    load_units,
    save_dataset,
)
from tests.conftest import csv_text, make_dataset, make_record


def _scalar_units():
    return {k: v for k, v in UnitDeclaration.base().units.items() if not k.startswith(("energy_", "emis_"))}


def _rows(years):
    return [make_record(year, floor_area=1.5e5).to_row() for year in years]


class TestLoadDataset:
    def test_well_formed_file(self):
        data = csv_text(_rows(range(2000, 2021))).encode()
        ds = load_dataset(data, source_name="china.csv")

        assert len(ds.records) == 21
        assert ds.years == tuple(range(2000, 2021))
        assert ds.active_uses == tuple(END_USES)
        assert ds.country == "china"
        assert ds.has_floor_area

    def test_missing_column_is_named(self):
        columns = [c for c in CSV_COLUMNS if c != "households"]
        data = csv_text(_rows([2000, 2001]), columns).encode()
        with pytest.raises(SchemaError) as excinfo:
            load_dataset(data)
        assert excinfo.value.column == "households"
        assert "households" in str(excinfo.value)

    def test_unknown_column(self):
        rows = _rows([2000])
        rows[0]["extra"] = 1
        data = csv_text(rows, CSV_COLUMNS + ["extra"]).encode()
        with pytest.raises(SchemaError, match="extra"):
            load_dataset(data)

    def test_negative_population_cites_row(self):
        rows = _rows([2000, 2001, 2002])
        rows[1]["population"] = -5
        with pytest.raises(DatasetValidationError) as excinfo:
            load_dataset(csv_text(rows).encode())
        assert excinfo.value.row == 2
        assert excinfo.value.column == "population"
        assert "row 2" in str(excinfo.value)

    def test_negative_energy_cites_column(self):
        rows = _rows([2000, 2001])
        rows[0]["energy_lighting"] = -1.0
        with pytest.raises(DatasetValidationError) as excinfo:
            load_dataset(csv_text(rows).encode())
        assert excinfo.value.column == "energy_lighting"

    def test_emissions_without_energy_rejected(self):
        rows = _rows([2000])
        rows[0]["energy_cooking"] = 0.0
        with pytest.raises(DatasetValidationError):
            load_dataset(csv_text(rows).encode())

    def test_parse_error_identifies_cell(self):
        rows = _rows([2000, 2001])
        rows[1]["gdp"] = "abc"
        with pytest.raises(ParseError) as excinfo:
            load_dataset(csv_text(rows).encode(), source_name="bad.csv")
        assert excinfo.value.row == 2
        assert excinfo.value.column == "gdp"
        assert "bad.csv" in str(excinfo.value)

    def test_only_floor_area_may_be_empty(self):
        rows = _rows([2000, 2001])
        rows[0]["floor_area"] = None
        ds = load_dataset(csv_text(rows).encode())
        assert ds.records[0].floor_area is None
        assert not ds.has_floor_area

        rows[0]["hce"] = None
        with pytest.raises(ParseError):
            load_dataset(csv_text(rows).encode())

    def test_duplicate_year_rejected(self):
        with pytest.raises(DatasetValidationError, match="duplicate year"):
            load_dataset(csv_text(_rows([2000, 2000])).encode())

    def test_records_sorted_by_year(self):
        ds = load_dataset(csv_text(_rows([2002, 2000, 2001])).encode())
        assert ds.years == (2000, 2001, 2002)

    def test_all_zero_end_use_is_inactive(self):
        rows = _rows([2000, 2001])
        for row in rows:
            row["energy_space_heating"] = 0.0
            row["emis_space_heating"] = 0.0
        ds = load_dataset(csv_text(rows).encode())
        assert EndUse.SPACE_HEATING not in ds.active_uses
        assert len(ds.active_uses) == 5


class TestUnits:
    def test_group_keys_convert_to_base_units(self):
        rows = _rows([2000])
        for use in END_USES:
            rows[0][use.energy_column] = 20000.0
            rows[0][use.emission_column] = 0.5
        declaration = UnitDeclaration(units={
            "population": "thousand_persons",
            "households": "households",
            "gdp": "billion_currency",
            "hce": "billion_currency",
            "floor_area": "m2",
            "energy": "TJ",
            "emissions": "MtCO2",
        })
        ds = load_dataset(csv_text(rows).encode(), declaration)
        record = ds.records[0]

        assert record.population == pytest.approx(1.0e6)
        assert record.gdp == pytest.approx(5.0e6)
        assert record.energy_of(EndUse.COOKING) == pytest.approx(20.0)
        assert record.emissions_of(EndUse.COOKING) == pytest.approx(500.0)

    def test_explicit_column_wins_over_group(self):
        units = {**_scalar_units(), "energy": "TJ", "emissions": "ktCO2", "energy_cooking": "PJ"}
        declaration = UnitDeclaration(units=units)
        resolved = declaration.resolve()
        assert resolved["energy_cooking"] == "PJ"
        assert resolved["energy_lighting"] == "TJ"

    def test_mtce_conversion(self):
        declaration = UnitDeclaration(units={**_scalar_units(), "energy": "Mtce", "emissions": "ktCO2"})
        assert declaration.factors()["energy_lighting"] == pytest.approx(29.3076)

    def test_unconvertible_unit(self):
        declaration = UnitDeclaration(units={**_scalar_units(), "energy": "PJ", "emissions": "furlongs"})
        with pytest.raises(UnitError) as excinfo:
            declaration.factors()
        assert excinfo.value.unit == "furlongs"

    def test_undeclared_column(self):
        units = dict(UnitDeclaration.base().units)
        del units["gdp"]
        with pytest.raises(UnitError, match="gdp"):
            UnitDeclaration(units=units).resolve()

    def test_load_units_file(self, tmp_path):
        path = tmp_path / "units.json"
        path.write_text('{"country": "X", "units": {"energy": "Mtce"}}', encoding="utf-8")
        declaration = load_units(path)
        assert declaration.country == "X"

        path.write_text('{"units": "nope"}', encoding="utf-8")
        with pytest.raises(InputError):
            load_units(path)


class TestRoundTrip:
    def test_save_and_reload_is_bit_identical(self, tmp_path, china):
        path = tmp_path / "china.csv"
        units_path = save_dataset(china, path)
        reloaded = load_dataset(path, load_units(units_path), source_name=str(path))

        assert units_path.name == "china.units.json"
        assert reloaded.records == china.records
        assert reloaded.country == "china_like"

    def test_serialization_is_stable(self, india):
        assert dataset_csv(india) == dataset_csv(load_dataset(dataset_csv(india).encode()))


class TestInterpolation:
    def test_linear_midpoint(self):
        ds = make_dataset([make_record(2000, population=100.0), make_record(2002, population=200.0)])
        filled = interpolate_years(ds)

        assert filled.years == (2000, 2001, 2002)
        assert filled.record(2001).population == pytest.approx(150.0)
        assert filled.record(2000) == ds.record(2000)
        assert filled.record(2002) == ds.record(2002)

    def test_gap_free_is_identity(self):
        ds = make_dataset([make_record(2000), make_record(2001)])
        assert interpolate_years(ds) is ds

    def test_single_record_rejected(self):
        with pytest.raises(PreconditionError):
            interpolate_years(make_dataset([make_record(2000)]))

    def test_floor_area_needs_both_neighbours(self):
        ds = make_dataset([
            make_record(2000, floor_area=10.0),
            make_record(2002, floor_area=20.0),
            make_record(2004),
        ])
        filled = interpolate_years(ds)
        assert filled.record(2001).floor_area == pytest.approx(15.0)
        assert filled.record(2003).floor_area is None


class TestFactorState:
    def test_worked_example(self):
        state = derive_factor_state(make_record(2000), END_USES, intensity_scale=1.0)

        assert state.p == pytest.approx(2.5)
        assert state.g == pytest.approx(5.0)
        assert state.s == pytest.approx(0.4)
        assert state.e == pytest.approx(0.05)
        assert state.w == pytest.approx((0.2, 0.3, 0.1, 0.1, 0.1, 0.2))
        assert state.k == pytest.approx((1.0,) * 6)
        assert state.c == pytest.approx(0.25)
        assert state.c == pytest.approx(100.0 / 400.0)

    def test_default_scale_is_kg_per_household(self):
        state = derive_factor_state(make_record(2000), END_USES)
        assert state.c == pytest.approx(100.0 * 1e6 / 400.0)

    def test_emission_factor_ratio(self):
        record = make_record(2000, emissions=(40.0, 30.0, 10.0, 10.0, 10.0, 20.0))
        state = derive_factor_state(record, END_USES, intensity_scale=1.0)
        assert state.k[EndUse.SPACE_COOLING.position] == pytest.approx(2.0)

    def test_excluded_use_gets_zeros(self):
        record = make_record(
            2000,
            energy=(20.0, 0.0, 10.0, 10.0, 10.0, 20.0),
            emissions=(20.0, 0.0, 10.0, 10.0, 10.0, 20.0),
        )
        active = [use for use in END_USES if use != EndUse.SPACE_HEATING]
        state = derive_factor_state(record, active)
        i = EndUse.SPACE_HEATING.position

        assert state.w[i] == 0.0 and state.k[i] == 0.0 and state.e_i[i] == 0.0
        assert math.fsum(state.w) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_record(self):
        record = make_record(
            2000,
            energy=(0.0, 30.0, 0.0, 0.0, 0.0, 0.0),
            emissions=(0.0, 30.0, 0.0, 0.0, 0.0, 0.0),
        )
        with pytest.raises(DegenerateStateError):
            derive_factor_state(record, [EndUse.SPACE_COOLING])

    def test_identity_holds(self, china):
        for year in china.years:
            state = china.factor_state(year)
            record = china.record(year)
            assert state.identity_value() == pytest.approx(state.c, rel=1e-9)
            assert state.c == pytest.approx(record.total_emissions * 1e6 / record.households, rel=1e-9)

    def test_scale_consistency(self):
        lam = 3.7
        record = make_record(2000, emissions=(25.0, 31.0, 12.0, 9.0, 14.0, 18.0))
        scaled = make_record(
            2000,
            energy=tuple(x * lam for x in record.energy),
            emissions=record.emissions,
        )
        a = derive_factor_state(record, END_USES)
        b = derive_factor_state(scaled, END_USES)

        assert b.e == pytest.approx(a.e * lam)
        assert b.e_i == pytest.approx(tuple(x * lam for x in a.e_i))
        assert b.k == pytest.approx(tuple(x / lam for x in a.k))
        assert b.w == pytest.approx(a.w)
        assert (b.p, b.g, b.s, b.c) == pytest.approx((a.p, a.g, a.s, a.c))

    def test_partially_zero_use_carries_nearest_factor(self):
        zero_lighting = dict(
            energy=(20.0, 30.0, 0.0, 10.0, 10.0, 20.0),
            emissions=(20.0, 30.0, 0.0, 10.0, 10.0, 20.0),
        )
        ds = make_dataset([
            make_record(2000, emissions=(20.0, 30.0, 30.0, 10.0, 10.0, 20.0)),
            make_record(2001, **zero_lighting),
            make_record(2002, emissions=(20.0, 30.0, 50.0, 10.0, 10.0, 20.0)),
            make_record(2003, **zero_lighting),
        ])
        i = EndUse.LIGHTING.position

        tie = ds.factor_state(2001)
        assert tie.w[i] == 0.0
        assert tie.k[i] == pytest.approx(3.0e6 / 10.0)

        nearest = ds.factor_state(2003)
        assert nearest.k[i] == pytest.approx(5.0e6 / 10.0)
        assert nearest.identity_value() == pytest.approx(nearest.c, rel=1e-9)

    def test_factor_table_columns(self, india):
        table = factor_table(india)
        assert list(table["year"]) == list(india.years)
        assert table["w:space_heating"].eq(0.0).all()
        assert {"c", "e", "p", "g", "s", "k:cooking", "e_i:lighting"} <= set(table.columns)


class TestFactorStateInvariants:
    def test_shares_must_sum_to_one(self):
        with pytest.raises(PreconditionError):
            FactorState.from_factors(1.0, 1.0, 1.0, 1.0, k=[1.0] * 6, w=[0.2] * 6)

    def test_scalars_must_be_positive(self):
        with pytest.raises(PreconditionError):
            FactorState.from_factors(1.0, 0.0, 1.0, 1.0, k=[1.0] * 6, w=[1.0 / 6] * 6)

    def test_record_validation(self):
        with pytest.raises(ValueError):
            YearRecord(
                year=2000, population=1.0, households=1.0, gdp=1.0, hce=1.0,
                energy=(1.0,) * 5, emissions=(1.0,) * 5,
            )
