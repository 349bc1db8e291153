"""Shared fixtures for the dsdkit test suite"""
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np
import pytest

from dsdkit.config import get_settings
from dsdkit.core.enduses import END_USE_COUNT, END_USES, EndUse
from dsdkit.core.monitoring import configure_logging
from dsdkit.core.units import BASE_UNITS
from dsdkit.models.dataset import Dataset, FactorState, YearRecord
from dsdkit.services import fixtures
from dsdkit.services.dataset import CSV_COLUMNS

BASE_RECORD = dict(
    population=1000.0,
    households=400.0,
    gdp=5000.0,
    hce=2000.0,
    floor_area=None,
    energy=(20.0, 30.0, 10.0, 10.0, 10.0, 20.0),
    emissions=(20.0, 30.0, 10.0, 10.0, 10.0, 20.0),
)


def make_record(year: int, **overrides) -> YearRecord:
    values = dict(BASE_RECORD)
    values.update(overrides)
    return YearRecord(year=year, **values)


def make_dataset(records: Iterable[YearRecord], country: str = "test") -> Dataset:
    records = sorted(records, key=lambda record: record.year)
    return Dataset(
        country=country,
        records=tuple(records),
        units=dict(BASE_UNITS),
        active_uses=Dataset.infer_active(records),
    )


def csv_text(rows: List[Dict[str, object]], columns: Optional[List[str]] = None) -> str:
    """CSV text from row dicts; missing cells are written empty"""
    columns = columns or CSV_COLUMNS
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join("" if row.get(c) is None else str(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def random_record(rng: np.random.Generator, year: int, active: List[EndUse]) -> YearRecord:
    population = rng.uniform(1e6, 1e9)
    gdp = population * rng.uniform(1e-3, 5e-2)
    energy = [rng.uniform(1.0, 1000.0) if use in active else 0.0 for use in END_USES]
    return YearRecord(
        year=year,
        population=population,
        households=population / rng.uniform(2.0, 4.0),
        gdp=gdp,
        hce=gdp * rng.uniform(0.3, 0.7),
        floor_area=population * rng.uniform(20.0, 40.0),
        energy=tuple(energy),
        emissions=tuple(e * rng.uniform(1.0, 250.0) for e in energy),
    )


def random_active(rng: np.random.Generator) -> List[EndUse]:
    size = int(rng.integers(1, END_USE_COUNT + 1))
    picked = sorted(rng.choice(END_USE_COUNT, size=size, replace=False))
    return [END_USES[i] for i in picked]


def random_state(rng: np.random.Generator, active: List[EndUse]) -> FactorState:
    k = np.zeros(END_USE_COUNT)
    w = np.zeros(END_USE_COUNT)
    positions = [use.position for use in active]
    k[positions] = rng.uniform(0.1, 3.0, size=len(positions))
    w[positions] = rng.dirichlet(np.ones(len(positions)))
    return FactorState.from_factors(
        e=rng.uniform(0.5, 2.0),
        p=rng.uniform(2.0, 4.0),
        g=rng.uniform(0.2, 3.0),
        s=rng.uniform(0.2, 0.8),
        k=k,
        w=w,
        active=active,
    )


def unity_state(k=None, w=None, active=None, **scalars) -> FactorState:
    values = {"e": 1.0, "p": 1.0, "g": 1.0, "s": 1.0}
    values.update(scalars)
    return FactorState.from_factors(
        k=k if k is not None else [1.0] * END_USE_COUNT,
        w=w if w is not None else [1.0 / END_USE_COUNT] * END_USE_COUNT,
        active=active,
        **values,
    )


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    configure_logging("WARNING", json=True)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def china() -> Dataset:
    return fixtures.china_like()


@pytest.fixture(scope="session")
def india() -> Dataset:
    return fixtures.india_like()


@pytest.fixture(scope="session")
def constant_ds() -> Dataset:
    return fixtures.constant()


@pytest.fixture
def seed_fixtures(monkeypatch):
    """Enable fixture:NAME inputs for the duration of a test"""
    monkeypatch.setenv("DSD_SEED_FIXTURES", "1")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def write_csv(tmp_path):
    def write(text: str, name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
