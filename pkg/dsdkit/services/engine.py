"""
DSD Engine
Shift/slack differential system A·dy = B·dz integrated by the N-segment Euler recursion

y = (c, F) holds the carbon intensity and the slack variable; z holds the 16 drivers
(e, p, g, s, k_u, F_u). Each segment contributes D(n) = A⁻¹·B·diag(dz), evaluated at the
state reached after n−1 segments.
"""
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import numpy as np
import structlog

from dsdkit.core.enduses import END_USE_COUNT, END_USES, EndUse
from dsdkit.core.exceptions import (
    ActiveSetMismatchError,
    NonFiniteStateError,
    PreconditionError,
    ShareRangeError,
    SingularSystemError,
)
from dsdkit.models.dataset import FactorState
from dsdkit.models.results import (
    DRIVER_COUNT,
    E_COL,
    F_COLS,
    G_COL,
    K_COLS,
    P_COL,
    S_COL,
    DecompositionResult,
    IntegrationSettings,
    SlackScheme,
    SystemMatrices,
)

logger = structlog.get_logger(__name__)

DET_GUARD = 1e-12
SHARE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class _PathStart:
    """Exogenous state at the start of the path, as arrays"""
    e: float
    p: float
    g: float
    s: float
    k: np.ndarray
    w: np.ndarray
    mask: np.ndarray

    @classmethod
    def of(cls, state: FactorState) -> "_PathStart":
        return cls(
            e=state.e,
            p=state.p,
            g=state.g,
            s=state.s,
            k=np.asarray(state.k, dtype=float),
            w=np.asarray(state.w, dtype=float),
            mask=state.active_mask,
        )


@dataclass(frozen=True)
class _Integration:
    raw: np.ndarray
    slack_step: float
    max_closure: float
    final_w: np.ndarray


def _sigma(w: np.ndarray, mask: np.ndarray, slack: SlackScheme) -> np.ndarray:
    if slack == SlackScheme.UNIFORM:
        return np.broadcast_to(mask.astype(float), w.shape)
    return w * mask


def system_batch(
    e: np.ndarray,
    p: np.ndarray,
    g: np.ndarray,
    s: np.ndarray,
    k: np.ndarray,
    w: np.ndarray,
    mask: np.ndarray,
    slack: SlackScheme
) -> Tuple[np.ndarray, np.ndarray]:
    """
    A and B for a batch of states

    Args:
        e, p, g, s: shape (n,)
        k, w: shape (n, 6), zero on inactive uses
        mask: active uses, shape (6,)

    Returns:
        A of shape (n, 2, 2) and B of shape (n, 2, 16)
    """
    n = e.shape[0]
    on = mask.astype(float)
    k = k * on
    w = w * on
    sigma = _sigma(w, mask, slack)
    pgs = p * g * s
    epgs = e * pgs
    kw = (k * w).sum(axis=1)

    A = np.zeros((n, 2, 2))
    A[:, 0, 0] = 1.0
    A[:, 0, 1] = -epgs * (k * sigma).sum(axis=1)
    A[:, 1, 1] = sigma.sum(axis=1)

    B = np.zeros((n, 2, DRIVER_COUNT))
    B[:, 0, E_COL] = kw * pgs
    B[:, 0, P_COL] = e * kw * g * s
    B[:, 0, G_COL] = e * kw * p * s
    B[:, 0, S_COL] = e * kw * p * g
    B[:, 0, K_COLS] = epgs[:, None] * w
    B[:, 0, F_COLS] = epgs[:, None] * k
    B[:, 1, F_COLS] = -on
    return A, B


def _matrices_at(start: _PathStart, slack: SlackScheme) -> SystemMatrices:
    A, B = system_batch(
        np.array([start.e]),
        np.array([start.p]),
        np.array([start.g]),
        np.array([start.s]),
        start.k[None, :],
        start.w[None, :],
        start.mask,
        slack,
    )
    return SystemMatrices(A=A[0], B=B[0])


def build_system_matrices(state: FactorState, slack: SlackScheme = SlackScheme.UNIFORM) -> SystemMatrices:
    """System matrices of A·dy = B·dz at one state"""
    return _matrices_at(_PathStart.of(state), SlackScheme(slack))


def _slack_step(start: _PathStart, dz: np.ndarray, slack: SlackScheme) -> float:
    """dF from the second row of the system; constant along the path since Σσ is invariant"""
    matrices = _matrices_at(start, slack)
    if abs(matrices.determinant) <= DET_GUARD:
        raise SingularSystemError(1, matrices.determinant)
    dy = np.linalg.solve(matrices.A, matrices.B @ dz)
    return float(dy[1])


def _shares_at(
    start: _PathStart,
    n: np.ndarray,
    d_shift: np.ndarray,
    slack_step: float,
    slack: SlackScheme
) -> np.ndarray:
    """Shares after n segments of w := w + dF_u + σ_u·dF"""
    on = start.mask.astype(float)
    steps = n[:, None]
    if slack == SlackScheme.UNIFORM:
        return start.w + steps * (d_shift + slack_step * on)
    if slack_step == 0.0:
        return start.w + steps * d_shift
    # w(n) = a^n·w0 + dF_u·(a^n − 1)/(a − 1), a = 1 + dF
    if slack_step > -1.0:
        log_a = math.log1p(slack_step)
        growth = np.exp(steps * log_a)
        geometric = np.expm1(steps * log_a) / slack_step
    else:
        # a ≤ 0: the whole aggregate shift is drained in one segment or overshoots
        growth = np.power(1.0 + slack_step, steps)
        geometric = (growth - 1.0) / slack_step
    return (growth * start.w + geometric * d_shift) * on


def _integrate(
    start: _PathStart,
    dz: np.ndarray,
    settings: IntegrationSettings,
    check_shares: bool = False
) -> _Integration:
    slack = SlackScheme(settings.slack)
    segments = settings.segments
    d_shift = dz[F_COLS] * start.mask
    slack_step = _slack_step(start, dz, slack)
    shift_sum = float(d_shift.sum())

    raw = np.zeros(DRIVER_COUNT)
    max_closure = 0.0
    for lo in range(0, segments, settings.chunk_segments):
        hi = min(lo + settings.chunk_segments, segments)
        n = np.arange(lo, hi, dtype=float)

        e = start.e + n * dz[E_COL]
        p = start.p + n * dz[P_COL]
        g = start.g + n * dz[G_COL]
        s = start.s + n * dz[S_COL]
        k = start.k + n[:, None] * dz[K_COLS]
        w = _shares_at(start, n, d_shift, slack_step, slack)
        if check_shares:
            after = _shares_at(start, n + 1.0, d_shift, slack_step, slack)
            _check_share_range(after, start.mask, lo)

        A, B = system_batch(e, p, g, s, k, w, start.mask, slack)
        finite = np.isfinite(A).all(axis=(1, 2)) & np.isfinite(B).all(axis=(1, 2))
        if not finite.all():
            raise NonFiniteStateError(lo + int(np.argmin(finite)) + 1)
        det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
        singular = np.abs(det) <= DET_GUARD
        if singular.any():
            index = int(np.argmax(singular))
            raise SingularSystemError(lo + index + 1, float(det[index]))

        solved = np.linalg.solve(A, B)
        D = solved * dz[None, None, :]
        if not np.isfinite(D).all():
            bad = ~np.isfinite(D).all(axis=(1, 2))
            raise NonFiniteStateError(lo + int(np.argmax(bad)) + 1)
        raw += D[:, 0, :].sum(axis=0)

        sigma = _sigma(w, start.mask, slack)
        closure = np.abs(shift_sum + slack_step * sigma.sum(axis=1))
        max_closure = max(max_closure, float(closure.max()))

    final_w = _shares_at(start, np.array([float(segments)]), d_shift, slack_step, slack)[0]
    return _Integration(raw=raw, slack_step=slack_step, max_closure=max_closure, final_w=final_w)


def _check_share_range(shares: np.ndarray, mask: np.ndarray, offset: int) -> None:
    active = shares[:, mask]
    bad = (active < -SHARE_TOLERANCE) | (active > 1.0 + SHARE_TOLERANCE)
    if not bad.any():
        return
    row, column = np.argwhere(bad)[0]
    use = [u for u, on in zip(END_USES, mask) if on][column]
    raise ShareRangeError(offset + int(row) + 1, use.value, float(active[row, column]))


def close_residual(raw: np.ndarray, delta_c: float) -> Tuple[np.ndarray, float]:
    """
    Spread the Euler residual over drivers in proportion to |raw contribution|

    Returns:
        Closed contributions summing to delta_c, and the residual that was spread
    """
    residual = delta_c - math.fsum(raw)
    weights = np.abs(raw)
    total = weights.sum()
    if total == 0.0:
        return raw.copy(), residual
    return raw + residual * weights / total, residual


def _check_pair(start: FactorState, end: FactorState) -> None:
    if start.active != end.active:
        raise ActiveSetMismatchError(
            f"active end uses differ: {[u.value for u in start.active]} vs {[u.value for u in end.active]}"
        )


def exogenous_delta(start: FactorState, end: FactorState) -> np.ndarray:
    """Δz with the historical gauge ΔF_u = Δw_u"""
    delta = np.zeros(DRIVER_COUNT)
    delta[E_COL] = end.e - start.e
    delta[P_COL] = end.p - start.p
    delta[G_COL] = end.g - start.g
    delta[S_COL] = end.s - start.s
    mask = start.active_mask
    delta[K_COLS] = (np.asarray(end.k) - np.asarray(start.k)) * mask
    delta[F_COLS] = (np.asarray(end.w) - np.asarray(start.w)) * mask
    return delta


def run_dsd(
    start: FactorState,
    end: FactorState,
    settings: Optional[IntegrationSettings] = None
) -> DecompositionResult:
    """
    Decompose c(end) − c(start) over the 16 drivers

    Args:
        start: State at the start of the interval
        end: State at the end of the interval
        settings: Segments and slack scheme

    Returns:
        DecompositionResult whose contributions sum to the analytic Δc
    """
    settings = settings or IntegrationSettings()
    _check_pair(start, end)

    dz = exogenous_delta(start, end) / settings.segments
    integration = _integrate(_PathStart.of(start), dz, settings)
    delta_c = end.c - start.c
    contributions, residual = close_residual(integration.raw, delta_c)
    slack_total = integration.slack_step * settings.segments

    logger.debug(
        "dsd_run_completed",
        interval=(start.year, end.year),
        segments=settings.segments,
        slack=SlackScheme(settings.slack).value,
        euler_residual=residual,
    )
    return DecompositionResult(
        interval=(start.year, end.year),
        delta_c=delta_c,
        contributions=tuple(float(x) for x in contributions),
        settings=settings,
        active_uses=start.active,
        method="dsd",
        start_c=start.c,
        end_c=end.c,
        integrated_delta_c=math.fsum(integration.raw),
        euler_residual=residual,
        slack_total=slack_total,
        max_slack_abs=abs(slack_total),
        max_closure_residual=integration.max_closure,
    )


def counterfactual_share_shift(
    state: FactorState,
    shifts: Mapping[EndUse, float],
    settings: Optional[IntegrationSettings] = None
) -> DecompositionResult:
    """
    Integrate a pure share-shift scenario from one state

    Only share_shift drivers move; the slack component redistributes the aggregate shift so
    shares keep summing to one. Shares are checked against [0, 1] after every segment.
    """
    settings = settings or IntegrationSettings()
    shift = np.zeros(END_USE_COUNT)
    for use, value in shifts.items():
        use = EndUse(use)
        if value != 0.0 and use not in state.active:
            raise PreconditionError(f"cannot shift inactive end use '{use.value}'")
        shift[use.position] = float(value)

    dz = np.zeros(DRIVER_COUNT)
    dz[F_COLS] = shift / settings.segments
    integration = _integrate(_PathStart.of(state), dz, settings, check_shares=True)

    final_w = tuple(float(x) for x in integration.final_w)
    end_c = state.e * state.p * state.g * state.s * math.fsum(
        k * w for k, w in zip(state.k, final_w)
    )
    delta_c = end_c - state.c
    contributions, residual = close_residual(integration.raw, delta_c)
    slack_total = integration.slack_step * settings.segments

    logger.debug(
        "share_shift_completed",
        year=state.year,
        shifts={EndUse(use).value: value for use, value in shifts.items()},
        slack_total=slack_total,
    )
    return DecompositionResult(
        interval=(state.year, state.year),
        delta_c=delta_c,
        contributions=tuple(float(x) for x in contributions),
        settings=settings,
        active_uses=state.active,
        method="dsd-scenario",
        start_c=state.c,
        end_c=end_c,
        integrated_delta_c=math.fsum(integration.raw),
        euler_residual=residual,
        slack_total=slack_total,
        max_slack_abs=abs(slack_total),
        max_closure_residual=integration.max_closure,
        final_shares=final_w,
    )
