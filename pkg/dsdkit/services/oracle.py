"""
Oracle Service
Independent reference implementations used to verify the Euler engine:
closed-form line integrals on toy products, a fine-step reference with the slack
eliminated explicitly, and an additive LMDI-I decomposition.
"""
import math
from typing import List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dsdkit.core.enduses import END_USE_COUNT, END_USES
from dsdkit.core.exceptions import ActiveSetMismatchError, NonFiniteStateError, PreconditionError
from dsdkit.core.monitoring import measure_latency
from dsdkit.models.dataset import FactorState
from dsdkit.models.results import (
    DRIVER_COUNT,
    DRIVERS,
    E_COL,
    F_COLS,
    G_COL,
    K_COLS,
    P_COL,
    S_COL,
    DecompositionResult,
    DriverKind,
    IntegrationSettings,
    SlackScheme,
)
from dsdkit.services.engine import close_residual, run_dsd

logger = structlog.get_logger(__name__)

MAX_TOY_FACTORS = 4
REFERENCE_CHUNK = 65536
ToyFactor = Literal["e", "p", "g", "s"]


class ToyIdentity(BaseModel):
    """Product of up to four factors moving linearly from start to end"""
    model_config = ConfigDict(frozen=True)

    start: List[float] = Field(min_length=1)
    end: List[float] = Field(min_length=1)
    factors: Optional[List[ToyFactor]] = None

    @model_validator(mode="after")
    def check_values(self) -> "ToyIdentity":
        if len(self.start) != len(self.end):
            raise ValueError("start and end need the same number of factors")
        if any(x <= 0 or not math.isfinite(x) for x in self.start + self.end):
            raise ValueError("toy factor values must be positive and finite")
        if self.factors is not None and len(self.factors) != len(self.start):
            raise ValueError("one factor name per value is required")
        return self

    @property
    def size(self) -> int:
        return len(self.start)

    def value(self, at: str = "end") -> float:
        return math.prod(self.end if at == "end" else self.start)

    def embed(self) -> Tuple[FactorState, FactorState]:
        """Place the toy factors on e, p, g, s (unity elsewhere, equal shares) so that c is the product"""
        if self.size > MAX_TOY_FACTORS:
            raise PreconditionError(f"toy identities support at most {MAX_TOY_FACTORS} factors")
        names = self.factors or ["e", "p", "g", "s"][: self.size]

        def state(values: List[float]) -> FactorState:
            scalars = {"e": 1.0, "p": 1.0, "g": 1.0, "s": 1.0}
            scalars.update(zip(names, values))
            return FactorState.from_factors(
                k=[1.0] * END_USE_COUNT,
                w=[1.0 / END_USE_COUNT] * END_USE_COUNT,
                active=END_USES,
                **scalars,
            )

        return state(self.start), state(self.end)


def analytic_line_integral(toy: ToyIdentity) -> Tuple[float, ...]:
    """
    Exact contribution of each factor along the straight path

    ∫₀¹ ∂(Π x_j)/∂x_i dt · Δx_i with x_j(t) = x_j0 + t·Δx_j, integrated as a polynomial in t.
    """
    if toy.size > MAX_TOY_FACTORS:
        raise PreconditionError(f"toy identities support at most {MAX_TOY_FACTORS} factors")
    paths = [Polynomial([x0, x1 - x0]) for x0, x1 in zip(toy.start, toy.end)]
    contributions = []
    for i, (x0, x1) in enumerate(zip(toy.start, toy.end)):
        partial = Polynomial([1.0])
        for j, path in enumerate(paths):
            if j != i:
                partial = partial * path
        antiderivative = partial.integ()
        contributions.append(float((antiderivative(1.0) - antiderivative(0.0)) * (x1 - x0)))
    return tuple(contributions)


def _check_pair(start: FactorState, end: FactorState) -> None:
    if start.active != end.active:
        raise ActiveSetMismatchError()


@measure_latency
def fine_step_reference(
    start: FactorState,
    end: FactorState,
    n_ref: int,
    engine_segments: int = 16000,
    slack: SlackScheme = SlackScheme.UNIFORM
) -> DecompositionResult:
    """
    Fine-step reference of the same left-point recursion

    The slack variable is eliminated by hand: a share shift dF_u moves c by
    e·p·g·s·(k_u − k̄)·dF_u, where k̄ is the σ-weighted mean emission factor.
    States are interpolated at t = n/N_ref rather than accumulated.
    """
    if n_ref < 64 * engine_segments:
        raise PreconditionError(f"reference needs N_ref >= 64 x {engine_segments}, got {n_ref}")
    _check_pair(start, end)
    slack = SlackScheme(slack)
    mask = start.active_mask.astype(float)

    k0, k1 = np.asarray(start.k) * mask, np.asarray(end.k) * mask
    w0, w1 = np.asarray(start.w) * mask, np.asarray(end.w) * mask
    d_e, d_p, d_g, d_s = end.e - start.e, end.p - start.p, end.g - start.g, end.s - start.s
    d_k, d_w = k1 - k0, w1 - w0

    sums = np.zeros(DRIVER_COUNT)
    for lo in range(0, n_ref, REFERENCE_CHUNK):
        t = np.arange(lo, min(lo + REFERENCE_CHUNK, n_ref), dtype=float) / n_ref
        e = start.e + t * d_e
        p = start.p + t * d_p
        g = start.g + t * d_g
        s = start.s + t * d_s
        k = k0 + t[:, None] * d_k
        w = w0 + t[:, None] * d_w

        weights = np.broadcast_to(mask, w.shape) if slack == SlackScheme.UNIFORM else w
        k_bar = (k * weights).sum(axis=1) / weights.sum(axis=1)
        kw = (k * w).sum(axis=1)
        epgs = e * p * g * s
        if not (np.isfinite(k_bar).all() and np.isfinite(epgs).all()):
            bad = ~(np.isfinite(k_bar) & np.isfinite(epgs))
            raise NonFiniteStateError(lo + int(np.argmax(bad)) + 1)

        sums[E_COL] += (kw * p * g * s).sum()
        sums[P_COL] += (e * kw * g * s).sum()
        sums[G_COL] += (e * kw * p * s).sum()
        sums[S_COL] += (e * kw * p * g).sum()
        sums[K_COLS] += (epgs[:, None] * w).sum(axis=0)
        sums[F_COLS] += (epgs[:, None] * (k - k_bar[:, None])).sum(axis=0)

    steps = np.zeros(DRIVER_COUNT)
    steps[E_COL], steps[P_COL], steps[G_COL], steps[S_COL] = d_e, d_p, d_g, d_s
    steps[K_COLS] = d_k
    steps[F_COLS] = d_w
    raw = sums * steps / n_ref

    delta_c = end.c - start.c
    contributions, residual = close_residual(raw, delta_c)
    return DecompositionResult(
        interval=(start.year, end.year),
        delta_c=delta_c,
        contributions=tuple(float(x) for x in contributions),
        settings=IntegrationSettings(segments=n_ref, slack=slack),
        active_uses=start.active,
        method="dsd-reference",
        start_c=start.c,
        end_c=end.c,
        integrated_delta_c=math.fsum(raw),
        euler_residual=residual,
    )


def log_mean(a: float, b: float) -> float:
    """Logarithmic mean L(a, b), with L(a, a) = a"""
    if a == b:
        return a
    return (a - b) / (math.log(a) - math.log(b))


def lmdi_decompose(start: FactorState, end: FactorState) -> DecompositionResult:
    """
    Additive LMDI-I on c_u = e·w_u·k_u·p·g·s, aggregated over end uses

    Share effects land on the share_shift drivers; they are comparable with the engine only
    in aggregate.
    """
    _check_pair(start, end)
    scalars0 = (start.e, start.p, start.g, start.s)
    scalars1 = (end.e, end.p, end.g, end.s)
    if min(scalars0 + scalars1) <= 0:
        raise PreconditionError("nonpositive factor value in e, p, g or s")

    contributions = np.zeros(DRIVER_COUNT)
    scalar_logs = [math.log(b / a) for a, b in zip(scalars0, scalars1)]
    for use in start.active:
        i = use.position
        factors0 = (start.w[i], start.k[i])
        factors1 = (end.w[i], end.k[i])
        if min(factors0 + factors1) <= 0:
            raise PreconditionError(f"nonpositive factor value for end use '{use.value}'")
        c0 = math.prod(scalars0) * start.w[i] * start.k[i]
        c1 = math.prod(scalars1) * end.w[i] * end.k[i]
        weight = log_mean(c1, c0)
        for col, log_ratio in zip((E_COL, P_COL, G_COL, S_COL), scalar_logs):
            contributions[col] += weight * log_ratio
        contributions[K_COLS.start + i] = weight * math.log(end.k[i] / start.k[i])
        contributions[F_COLS.start + i] = weight * math.log(end.w[i] / start.w[i])

    return DecompositionResult(
        interval=(start.year, end.year),
        delta_c=end.c - start.c,
        contributions=tuple(float(x) for x in contributions),
        settings=IntegrationSettings(segments=1),
        active_uses=start.active,
        method="lmdi",
        start_c=start.c,
        end_c=end.c,
        integrated_delta_c=float(contributions.sum()),
    )


def _relative_gap(a: float, b: float) -> float:
    scale = max(abs(b), 1e-12)
    return abs(a - b) / scale


@measure_latency
def crosscheck(
    start: FactorState,
    end: FactorState,
    settings: Optional[IntegrationSettings] = None,
    reference_segments: Optional[int] = None
) -> pd.DataFrame:
    """
    Engine vs fine-step reference vs LMDI, per driver

    Share-shift drivers are compared with LMDI only through their total.
    """
    settings = settings or IntegrationSettings()
    n_ref = reference_segments or 64 * settings.segments
    engine = run_dsd(start, end, settings)
    reference = fine_step_reference(start, end, n_ref, settings.segments, settings.slack)
    lmdi = lmdi_decompose(start, end)

    rows = []
    for driver, a, b, c in zip(DRIVERS, engine.contributions, reference.contributions, lmdi.contributions):
        rows.append({
            "driver": driver.label,
            "dsd": a,
            "reference": b,
            "lmdi": c,
            "dsd_vs_reference": _relative_gap(a, b),
            "dsd_vs_lmdi": None if driver.kind == DriverKind.SHARE_SHIFT else _relative_gap(a, c),
        })
    totals = [r.kind_total(DriverKind.SHARE_SHIFT) for r in (engine, reference, lmdi)]
    rows.append({
        "driver": "share_shift:total",
        "dsd": totals[0],
        "reference": totals[1],
        "lmdi": totals[2],
        "dsd_vs_reference": _relative_gap(totals[0], totals[1]),
        "dsd_vs_lmdi": _relative_gap(totals[0], totals[2]),
    })
    rows.append({
        "driver": "delta_c",
        "dsd": engine.delta_c,
        "reference": reference.delta_c,
        "lmdi": lmdi.delta_c,
        "dsd_vs_reference": _relative_gap(engine.delta_c, reference.delta_c),
        "dsd_vs_lmdi": _relative_gap(engine.delta_c, lmdi.delta_c),
    })
    logger.info("crosscheck_completed", interval=(start.year, end.year), reference_segments=n_ref)
    return pd.DataFrame(rows)
