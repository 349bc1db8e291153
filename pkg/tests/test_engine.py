"""Shift/slack system assembly and Euler integration"""
import math
import time

import numpy as np
import pytest

from dsdkit.core.enduses import END_USES, EndUse
from dsdkit.core.exceptions import (
    ActiveSetMismatchError,
    NonFiniteStateError,
    PreconditionError,
    ShareRangeError,
)
from dsdkit.models.dataset import FactorState
from dsdkit.models.results import (
    DRIVERS,
    E_COL,
    F_COLS,
    G_COL,
    K_COLS,
    P_COL,
    S_COL,
    DriverKind,
    IntegrationSettings,
    SlackScheme,
    emission_factor_driver,
    share_shift_driver,
)
from dsdkit.services.dataset import derive_factor_state
from dsdkit.services.decomposition import chain_yearly
from dsdkit.services.engine import (
    build_system_matrices,
    counterfactual_share_shift,
    exogenous_delta,
    run_dsd,
)
from dsdkit.services.oracle import ToyIdentity, analytic_line_integral
from tests.conftest import make_dataset, random_active, random_record, random_state, unity_state

COOL = EndUse.SPACE_COOLING
HEAT = EndUse.SPACE_HEATING
TWO_USES = [COOL, HEAT]


def _two_use_state(k=(2.0, 1.0), w=(0.5, 0.5)) -> FactorState:
    return unity_state(k=[k[0], k[1], 0, 0, 0, 0], w=[w[0], w[1], 0, 0, 0, 0], active=TWO_USES)


class TestSystemMatrices:
    def test_unity_state(self):
        m = build_system_matrices(unity_state(), SlackScheme.UNIFORM)

        assert m.A == pytest.approx(np.array([[1.0, -6.0], [0.0, 6.0]]))
        assert m.B[0, E_COL] == pytest.approx(1.0)
        assert m.B[0, K_COLS] == pytest.approx(np.full(6, 1.0 / 6))
        assert m.B[0, F_COLS] == pytest.approx(np.ones(6))
        assert m.determinant == pytest.approx(6.0)

    def test_second_row(self):
        m = build_system_matrices(unity_state(), SlackScheme.UNIFORM)
        assert m.A[1, 0] == 0.0
        assert list(m.B[1, F_COLS]) == [-1.0] * 6
        assert not m.B[1, :F_COLS.start].any()

    def test_proportional_sum_of_shares(self, rng):
        state = random_state(rng, random_active(rng))
        m = build_system_matrices(state, SlackScheme.PROPORTIONAL)
        assert m.A[1, 1] == pytest.approx(1.0, abs=1e-12)

    def test_inactive_columns_are_zero(self):
        m = build_system_matrices(_two_use_state(), SlackScheme.UNIFORM)
        for use in END_USES[2:]:
            assert not m.B[:, K_COLS.start + use.position].any()
            assert not m.B[:, F_COLS.start + use.position].any()
        assert m.A[1, 1] == 2.0

    def test_partials_match_identity(self, rng):
        state = random_state(rng, random_active(rng))
        m = build_system_matrices(state, SlackScheme.UNIFORM)
        kw = math.fsum(k * w for k, w in zip(state.k, state.w))
        assert m.B[0, P_COL] == pytest.approx(state.e * kw * state.g * state.s)
        assert m.B[0, G_COL] == pytest.approx(state.e * kw * state.p * state.s)
        assert m.B[0, S_COL] == pytest.approx(state.e * kw * state.p * state.g)


class TestToyIdentities:
    def test_two_factor_toy(self):
        start, end = ToyIdentity(start=[1, 1], end=[2, 3], factors=["g", "s"]).embed()
        result = run_dsd(start, end, IntegrationSettings(segments=16000))

        assert result.contribution(DRIVERS[G_COL]) == pytest.approx(2.0, abs=1e-3)
        assert result.contribution(DRIVERS[S_COL]) == pytest.approx(3.0, abs=1e-3)
        others = [v for i, v in enumerate(result.contributions) if i not in (G_COL, S_COL)]
        assert others == [0.0] * 14

    def test_three_factor_symmetric_toy(self):
        start, end = ToyIdentity(start=[1, 1, 1], end=[2, 2, 2], factors=["p", "g", "s"]).embed()
        result = run_dsd(start, end)
        for col in (P_COL, G_COL, S_COL):
            assert result.contributions[col] == pytest.approx(7.0 / 3.0, abs=1e-3)

    def test_engine_matches_analytic_integrals(self):
        toy = ToyIdentity(start=[1.5, 0.8, 2.0, 1.2], end=[0.9, 1.6, 2.4, 0.7])
        start, end = toy.embed()
        exact = analytic_line_integral(toy)
        scale = start.c / toy.value("start")
        result = run_dsd(start, end)
        for col, value in zip((E_COL, P_COL, G_COL, S_COL), exact):
            assert result.contributions[col] == pytest.approx(value * scale, abs=1e-3)

    def test_single_emission_factor_gets_all_change(self):
        k_end = [1.0] * 6
        k_end[EndUse.LIGHTING.position] = 2.5
        start, end = unity_state(), unity_state(k=k_end)
        result = run_dsd(start, end, IntegrationSettings(segments=100))
        driver = emission_factor_driver(EndUse.LIGHTING)

        assert result.contribution(driver) == pytest.approx(result.delta_c, rel=1e-12)
        assert all(v == 0.0 for d, v in zip(DRIVERS, result.contributions) if d != driver)


class TestAdditivity:
    @pytest.mark.parametrize("slack", [SlackScheme.UNIFORM, SlackScheme.PROPORTIONAL])
    def test_random_datasets(self, slack):
        rng = np.random.default_rng(7 if slack == SlackScheme.UNIFORM else 11)
        settings = IntegrationSettings(segments=64, slack=slack)
        for _ in range(1000):
            active = random_active(rng)
            ds = make_dataset([random_record(rng, 2000, active), random_record(rng, 2001, active)])
            result = run_dsd(ds.factor_state(2000), ds.factor_state(2001), settings)
            assert result.additivity_gap() <= 1e-9 * max(1.0, abs(result.delta_c))
            assert result.max_closure_residual <= 1e-12
            assert result.max_slack_abs <= 1e-12

    def test_residual_is_reported(self, rng):
        active = random_active(rng)
        start, end = random_state(rng, active), random_state(rng, active)
        result = run_dsd(start, end, IntegrationSettings(segments=10))

        assert result.euler_residual == pytest.approx(result.delta_c - result.integrated_delta_c)
        assert result.end_c == end.c and result.start_c == start.c

    def test_deterministic(self, rng):
        active = random_active(rng)
        start, end = random_state(rng, active), random_state(rng, active)
        settings = IntegrationSettings(segments=5000, slack=SlackScheme.PROPORTIONAL, chunk_segments=777)
        assert run_dsd(start, end, settings) == run_dsd(start, end, settings)

    def test_chunking_does_not_change_result(self, rng):
        active = random_active(rng)
        start, end = random_state(rng, active), random_state(rng, active)
        a = run_dsd(start, end, IntegrationSettings(segments=3000, chunk_segments=3000))
        b = run_dsd(start, end, IntegrationSettings(segments=3000, chunk_segments=128))
        assert a.contributions == pytest.approx(b.contributions, rel=1e-12, abs=1e-12)


class TestSlackMechanics:
    def test_historical_gauge(self):
        start = _two_use_state(w=(0.5, 0.5))
        end = _two_use_state(w=(0.6, 0.4))
        delta = exogenous_delta(start, end)
        assert delta[F_COLS][:2] == pytest.approx([0.1, -0.1])

    def test_structure_attribution_is_slack_mediated(self):
        start = _two_use_state(w=(0.5, 0.5))
        end = _two_use_state(w=(0.6, 0.4))
        result = run_dsd(start, end, IntegrationSettings(segments=200))

        dw = [result.contribution(share_shift_driver(use)) for use in TWO_USES]
        assert dw == pytest.approx([0.05, 0.05], abs=1e-9)
        naive = [2.0 * 0.1, 1.0 * -0.1]
        assert dw != pytest.approx(naive, abs=1e-3)
        assert math.fsum(dw) == pytest.approx(math.fsum(naive), abs=1e-9)
        assert result.max_slack_abs <= 1e-12

    def test_active_set_mismatch(self):
        with pytest.raises(ActiveSetMismatchError):
            run_dsd(unity_state(), _two_use_state())


class TestInvariance:
    def _pair(self, rng, transform):
        active = list(END_USES)
        records = [random_record(rng, 2000, active), random_record(rng, 2001, active)]
        base = [derive_factor_state(r, active) for r in records]
        changed = [derive_factor_state(transform(r), active) for r in records]
        settings = IntegrationSettings(segments=400)
        return run_dsd(*base, settings), run_dsd(*changed, settings)

    def test_energy_unit_rescaling(self, rng):
        lam = 41.868
        a, b = self._pair(rng, lambda r: r.model_copy(update={"energy": tuple(x * lam for x in r.energy)}))
        assert b.contributions == pytest.approx(a.contributions, rel=1e-9, abs=1e-9 * abs(a.delta_c))

    def test_currency_unit_rescaling(self, rng):
        lam = 1e-3
        a, b = self._pair(rng, lambda r: r.model_copy(update={"gdp": r.gdp * lam, "hce": r.hce * lam}))
        assert b.contributions == pytest.approx(a.contributions, rel=1e-9, abs=1e-9 * abs(a.delta_c))

    def test_end_use_permutation(self, rng):
        order = [3, 0, 5, 1, 4, 2]

        def permute(record):
            return record.model_copy(update={
                "energy": tuple(record.energy[i] for i in order),
                "emissions": tuple(record.emissions[i] for i in order),
            })

        a, b = self._pair(rng, permute)
        tol = 1e-9 * abs(a.delta_c)
        for col in (E_COL, P_COL, G_COL, S_COL):
            assert b.contributions[col] == pytest.approx(a.contributions[col], rel=1e-9, abs=tol)
        for new, old in enumerate(order):
            for block in (K_COLS, F_COLS):
                assert b.contributions[block.start + new] == pytest.approx(
                    a.contributions[block.start + old], rel=1e-9, abs=tol
                )


class TestConvergence:
    def _error(self, toy: ToyIdentity, segments: int) -> float:
        start, end = toy.embed()
        scale = start.c / toy.value("start")
        exact = [v * scale for v in analytic_line_integral(toy)]
        names = toy.factors or ["e", "p", "g", "s"][: toy.size]
        columns = [{"e": E_COL, "p": P_COL, "g": G_COL, "s": S_COL}[n] for n in names]
        result = run_dsd(start, end, IntegrationSettings(segments=segments))
        return max(abs(result.contributions[c] - x) for c, x in zip(columns, exact))

    @pytest.mark.parametrize("toy", [
        ToyIdentity(start=[1, 1], end=[2, 3], factors=["g", "s"]),
        ToyIdentity(start=[1.0, 2.0, 0.5], end=[3.0, 1.0, 1.5], factors=["e", "g", "s"]),
    ])
    def test_first_order(self, toy):
        for segments in (50, 400):
            assert self._error(toy, 2 * segments) <= 0.6 * self._error(toy, segments)

    def test_default_resolution_is_accurate(self):
        toy = ToyIdentity(start=[1, 1], end=[2, 3], factors=["g", "s"])
        assert self._error(toy, 16000) < 1e-4


class TestCounterfactual:
    def test_uniform_split(self):
        state = _two_use_state(w=(0.5, 0.5))
        result = counterfactual_share_shift(state, {COOL: 0.1}, IntegrationSettings(segments=1000))

        assert result.final_shares[:2] == pytest.approx((0.55, 0.45), abs=1e-12)
        assert result.slack_total == pytest.approx(-0.05, abs=1e-12)
        assert math.fsum(result.final_shares) == pytest.approx(1.0, abs=1e-12)
        assert result.max_closure_residual <= 1e-12

    def test_single_segment_hand_value(self):
        state = _two_use_state(k=(2.0, 1.0))
        result = counterfactual_share_shift(state, {COOL: 0.1}, IntegrationSettings(segments=1))

        assert result.contribution(share_shift_driver(COOL)) == pytest.approx(0.05, abs=1e-12)
        assert result.delta_c == pytest.approx(0.05, abs=1e-12)
        assert result.method == "dsd-scenario"

    def test_zero_shift_is_identity(self, rng):
        state = random_state(rng, random_active(rng))
        result = counterfactual_share_shift(state, {}, IntegrationSettings(segments=100))

        assert result.contributions == (0.0,) * 16
        assert result.final_shares == state.w
        assert result.end_c == state.c

    def test_proportional_closure(self):
        state = _two_use_state(w=(0.3, 0.7))
        settings = IntegrationSettings(segments=500, slack=SlackScheme.PROPORTIONAL)
        result = counterfactual_share_shift(state, {COOL: 0.2}, settings)

        assert math.fsum(result.final_shares) == pytest.approx(1.0, abs=1e-12)
        assert result.additivity_gap() <= 1e-9
        assert result.kind_total(DriverKind.SHARE_SHIFT) == pytest.approx(result.delta_c)

    def test_proportional_full_drain_in_one_segment(self):
        settings = IntegrationSettings(segments=1, slack=SlackScheme.PROPORTIONAL)
        result = counterfactual_share_shift(_two_use_state(w=(0.5, 0.5)), {COOL: 1.0}, settings)

        assert result.slack_total == pytest.approx(-1.0, abs=1e-12)
        assert result.final_shares[:2] == pytest.approx((1.0, 0.0), abs=1e-12)
        assert result.end_c == pytest.approx(2.0, abs=1e-12)
        assert math.fsum(result.contributions) == pytest.approx(result.delta_c, abs=1e-12)

    def test_proportional_overshoot_reports_share_range(self):
        settings = IntegrationSettings(segments=1, slack=SlackScheme.PROPORTIONAL)
        with pytest.raises(ShareRangeError) as excinfo:
            counterfactual_share_shift(_two_use_state(w=(0.5, 0.5)), {COOL: 1.5}, settings)

        assert excinfo.value.segment == 1
        assert excinfo.value.end_use == "space_cooling"
        assert excinfo.value.value == pytest.approx(1.25, abs=1e-12)

    def test_share_range_violation(self):
        state = _two_use_state(w=(0.5, 0.5))
        with pytest.raises(ShareRangeError) as excinfo:
            counterfactual_share_shift(state, {COOL: 1.2}, IntegrationSettings(segments=100))
        assert excinfo.value.segment > 1
        assert excinfo.value.end_use in ("space_cooling", "space_heating")

    def test_inactive_use_rejected(self):
        with pytest.raises(PreconditionError):
            counterfactual_share_shift(_two_use_state(), {EndUse.COOKING: 0.1})


class TestNumericFailures:
    def test_overflow_reports_segment(self):
        low_hce = unity_state(e=1e200, s=1e-200)
        high_gdp = unity_state(g=1e200, s=1e-200)
        with pytest.raises(NonFiniteStateError) as excinfo:
            run_dsd(low_hce, high_gdp, IntegrationSettings(segments=10))
        assert 1 < excinfo.value.segment <= 10


def test_full_chain_runtime(china):
    started = time.perf_counter()
    chain = chain_yearly(china, 2000, 2020, IntegrationSettings(segments=16000))
    assert len(chain) == 20
    assert time.perf_counter() - started < 5.0
