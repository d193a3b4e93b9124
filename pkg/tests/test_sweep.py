import math

import numpy as np
import pytest

from gequeue.channel import ChannelParams, channel_memory, channel_stationary
from gequeue.coding import CodeConfig
from gequeue.qbd_model import TrafficParams
from gequeue.sweep import (
    SweepSpec,
    decay_surface,
    degenerate_parameter,
    infinite_backlog_throughput,
    memory_sweep,
    rate_conversions,
    surface_optimum,
    sweep_code_rate,
    throughput_sweep,
)

from .conftest import BASE_CHANNEL, BASE_N, BASE_TAUS, BASE_TRAFFIC

K_RANGE = tuple(range(60, 111))


@pytest.fixture(scope="module")
def base_sweep():
    spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, K_RANGE)
    return sweep_code_rate(spec)


class TestSpec:
    def test_default_k_range(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(10, 5), BASE_TRAFFIC)
        assert spec.k_values == tuple(range(1, 11))

    @pytest.mark.parametrize("kw", [{"k_values": (0, 3)}, {"k_values": (11,)}, {"metrics": ("speed",)}, {"taus": ()}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SweepSpec(BASE_CHANNEL, CodeConfig(10, 5), BASE_TRAFFIC, **kw)


class TestCodeRateSweep:
    def test_tail_minimiser(self, base_sweep):
        assert base_sweep.argmin_tail == {t: 83 for t in BASE_TAUS}
        assert not base_sweep.degenerate

    def test_decay_and_throughput_optimisers(self, base_sweep):
        assert base_sweep.argmax_decay == 83
        assert base_sweep.argmax_throughput == 87

    def test_rows(self, base_sweep):
        rows = {r["K"]: r for r in base_sweep.rows}
        assert sorted(rows) == list(K_RANGE)
        stable = sorted(k for k, r in rows.items() if r["stable"])
        # stability is lost at high rate and never regained
        assert stable == list(range(60, stable[-1] + 1)) and stable[-1] < 110
        assert all(rows[k]["error"] == "unstable" for k in K_RANGE if k > stable[-1])
        r83 = rows[83]
        assert r83["spectral_radius"] == pytest.approx(0.78706344, abs=1e-8)
        assert r83["decay_rate"] == pytest.approx(math.log(r83["spectral_radius"]))
        tails = [r83["tail"][t] for t in BASE_TAUS]
        assert tails == sorted(tails, reverse=True)

    def test_tail_is_unimodal_in_k(self, base_sweep):
        tail = [r["tail"][5] for r in base_sweep.rows if r["stable"]]
        best = int(np.argmin(tail))
        assert all(np.diff(tail[: best + 1]) < 0)
        assert all(np.diff(tail[best:]) > 0)

    def test_unstable_points_are_recorded(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, (83, 112, 114))
        res = sweep_code_rate(spec)
        rows = {r["K"]: r for r in res.rows}
        assert rows[114]["error"] == "unstable" and not rows[114]["stable"]
        assert rows[114]["stability_margin"] < 0
        assert res.argmin_tail[5] == 83

    def test_no_arrivals_is_degenerate(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), TrafficParams(0.0, 0.01), (70, 80, 90))
        res = sweep_code_rate(spec)
        assert res.degenerate
        assert all(r["decay_rate"] == -math.inf for r in res.rows)

    def test_deterministic(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, (80, 83, 86))
        a, b = sweep_code_rate(spec), sweep_code_rate(spec)
        assert a.rows == b.rows

    def test_metric_subset(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, (83,), metrics=("mean_queue",))
        (row,) = sweep_code_rate(spec).rows
        assert row["mean_queue"] == pytest.approx(3.94386, abs=1e-5)
        assert "tail" not in row and "throughput" not in row


class TestThroughput:
    def test_base_channel(self):
        out = throughput_sweep(BASE_CHANNEL, BASE_N)
        assert out["argmax"] == 87 and out["ties"] == [87]
        assert out["shannon_reference"] == pytest.approx(102.6)
        assert max(out["throughput"].values()) < out["shannon_reference"]

    def test_erasure_free_channel_uses_every_bit(self):
        ch = ChannelParams(0.1, 0.1, 0.0, 0.0)
        out = throughput_sweep(ch, 30)
        assert out["argmax"] == 30
        assert out["throughput"][17] == pytest.approx(17.0)

    def test_ties_reported(self):
        # with every bit erased nothing is ever delivered, so all K tie at zero
        out = throughput_sweep(ChannelParams(0.1, 0.1, 1.0, 1.0), 8)
        assert out["ties"] == list(range(1, 9))

    def test_bounded_by_k(self):
        for k in (10, 50, 100):
            assert 0 <= infinite_backlog_throughput(BASE_CHANNEL, CodeConfig(BASE_N, k)) <= k


class TestSurfaces:
    def test_decay_surface_near_operating_load(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, tuple(range(78, 90)))
        rows = decay_surface(spec, [47.5, 48.75])
        assert surface_optimum(rows) == {47.5: 83, 48.75: 83}
        assert sorted({r["rho"] for r in rows}) == pytest.approx([0.25 / 48.75, 0.25 / 47.5])

    def test_optimum_moves_with_heavier_load(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, tuple(range(78, 90)))
        best = surface_optimum(decay_surface(spec, [45.0, 60.0]))
        assert best[45.0] <= 83 <= best[60.0]

    def test_infeasible_arrival(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, (83,))
        with pytest.raises(ValueError):
            decay_surface(spec, [0.1])

    def test_memory_sweep_keeps_state_law(self):
        spec = SweepSpec(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, tuple(range(75, 115)))
        rows = memory_sweep(spec, [0.0, 0.975, 0.999], tau=5)
        for r in rows:
            ch = ChannelParams(r["alpha"], r["beta"], 0.49, 0.0025)
            assert channel_memory(ch) == pytest.approx(r["memory"])
            np.testing.assert_allclose(channel_stationary(ch), [0.2, 0.8])
        best = {r["memory"]: r["best_K_tail"] for r in rows}
        assert best[0.975] == 83
        assert best[0.999] > best[0.975]


class TestHelpers:
    def test_rate_conversions(self):
        out = rate_conversions(BASE_CHANNEL, CodeConfig(BASE_N, 83), BASE_TRAFFIC, 4.615e-3)
        assert out["arrival_bits_per_sec"] == pytest.approx(10_563, abs=50)
        assert out["ergodic_capacity_bits_per_sec"] == pytest.approx(22_232, abs=50)

    def test_unit_slot(self):
        traffic = TrafficParams(0.5, 0.5)
        out = rate_conversions(BASE_CHANNEL, CodeConfig(10, 5), traffic, 1.0)
        assert out["arrival_bits_per_sec"] == pytest.approx(1.0)
        with pytest.raises(ValueError):
            rate_conversions(BASE_CHANNEL, CodeConfig(10, 5), traffic, 0.0)

    def test_degenerate_parameter_names(self):
        code = CodeConfig(10, 5)
        assert "gamma" in degenerate_parameter(BASE_CHANNEL, code, TrafficParams(1.0, 0.1))
        assert "alpha+beta" in degenerate_parameter(ChannelParams(0.4, 0.6, 0.3, 0.1), code, BASE_TRAFFIC)
        assert degenerate_parameter(BASE_CHANNEL, code, BASE_TRAFFIC) is None
