"""Energy metering tests for the compute/transfer cost model."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from greenloop.energy import (
    EnergyLedger,
    EnergyModel,
    StageUsage,
    energy_of,
    ledger_to_dict,
    record_stage,
)

nonneg = st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False)


class TestEnergyOf:
    def test_zero_weights_zero_energy(self):
        model = EnergyModel(alpha=0.0, beta=0.0)
        assert energy_of(model, StageUsage("s", 123.0, 456.0)) == 0.0

    def test_compute_only(self):
        model = EnergyModel(alpha=1.0, beta=0.0)
        assert energy_of(model, StageUsage("s", compute_seconds=5.0)) == 5.0

    def test_mixed_arithmetic(self):
        # 0.002*100 + 0.0001*50 = 0.205
        model = EnergyModel(alpha=0.002, beta=0.0001)
        usage = StageUsage("s", compute_seconds=100.0, transferred_mb=50.0)
        assert energy_of(model, usage) == pytest.approx(0.205)

    def test_negative_usage_rejected(self):
        with pytest.raises(ValueError):
            StageUsage("s", compute_seconds=-1.0)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            EnergyModel(alpha=-0.1, beta=0.0)


class TestRecordStage:
    def test_two_one_kwh_stages(self):
        model = EnergyModel(alpha=1.0, beta=0.0)
        ledger = EnergyLedger()
        ledger = record_stage(ledger, model, StageUsage("a", compute_seconds=1.0))
        ledger = record_stage(ledger, model, StageUsage("b", compute_seconds=1.0))
        assert ledger.total_kwh == pytest.approx(2.0)
        assert [u.stage_name for u, _ in ledger.stages] == ["a", "b"]

    def test_zero_usage_leaves_total_unchanged(self):
        model = EnergyModel()
        ledger = record_stage(EnergyLedger(), model, StageUsage("a", 10.0, 10.0))
        before = ledger.total_kwh
        ledger = record_stage(ledger, model, StageUsage("idle"))
        assert ledger.total_kwh == before
        assert len(ledger.stages) == 2

    def test_input_ledger_untouched(self):
        model = EnergyModel()
        first = record_stage(EnergyLedger(), model, StageUsage("a", 1.0))
        record_stage(first, model, StageUsage("b", 2.0))
        assert len(first.stages) == 1

    def test_serialization_shape(self):
        model = EnergyModel(alpha=0.5, beta=0.0)
        ledger = record_stage(EnergyLedger(), model, StageUsage("a", 2.0, 0.0))
        doc = ledger_to_dict(ledger)
        assert doc["total_kwh"] == pytest.approx(1.0)
        assert doc["stages"][0]["stage"] == "a"
        assert doc["stages"][0]["energy_kwh"] == pytest.approx(1.0)


class TestProperties:
    @given(alpha=nonneg, beta=nonneg, c1=nonneg, c2=nonneg, mb=nonneg)
    def test_monotone_in_compute(self, alpha, beta, c1, c2, mb):
        model = EnergyModel(alpha=alpha, beta=beta)
        lo, hi = sorted((c1, c2))
        assert energy_of(model, StageUsage("s", lo, mb)) <= energy_of(
            model, StageUsage("s", hi, mb)
        )

    @given(alpha=nonneg, beta=nonneg, c=nonneg, m1=nonneg, m2=nonneg)
    def test_monotone_in_transfer(self, alpha, beta, c, m1, m2):
        model = EnergyModel(alpha=alpha, beta=beta)
        lo, hi = sorted((m1, m2))
        assert energy_of(model, StageUsage("s", c, lo)) <= energy_of(
            model, StageUsage("s", c, hi)
        )

    @given(usages=st.lists(st.tuples(nonneg, nonneg), min_size=0, max_size=8))
    def test_ledger_total_is_sum_of_stages(self, usages):
        model = EnergyModel(alpha=0.003, beta=0.0002)
        ledger = EnergyLedger()
        for i, (c, mb) in enumerate(usages):
            ledger = record_stage(ledger, model, StageUsage(f"s{i}", c, mb))
        assert ledger.total_kwh == pytest.approx(
            sum(kwh for _, kwh in ledger.stages), rel=1e-9, abs=1e-12
        )
        assert len(ledger.stages) == len(usages)
