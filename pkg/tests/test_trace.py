import numpy as np
import pytest

from pcpow.trace import CSV_HEADER, HashrateTrace, TraceError, replay_trace


class TestHashrateTrace:
    def test_constant(self):
        t = HashrateTrace.constant(2.5)
        assert t.rate_at(0) == 2.5
        assert t.rate_at(1e9) == 2.5

    def test_step_semantics(self):
        t = HashrateTrace((0.0, 10.0, 20.0), (1.0, 2.0, 3.0))
        assert t.rate_at(0) == 1.0
        assert t.rate_at(9.99) == 1.0
        assert t.rate_at(10.0) == 2.0
        assert t.rate_at(25.0) == 3.0

    def test_rejects_bad_series(self):
        with pytest.raises(TraceError):
            HashrateTrace((), ())
        with pytest.raises(TraceError):
            HashrateTrace((0.0, 0.0), (1.0, 2.0))
        with pytest.raises(TraceError):
            HashrateTrace((0.0, 1.0), (1.0, -2.0))

    def test_csv_round_trip(self, tmp_path):
        t = HashrateTrace.ramp(3.0, 1000.0, steps=40)
        path = tmp_path / "trace.csv"
        t.write_csv(path)
        first = path.read_bytes()
        back = HashrateTrace.read_csv(path)
        assert back.times == t.times
        assert back.rates == t.rates
        back.write_csv(path)
        assert path.read_bytes() == first

    def test_csv_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,rate\n0,1\n")
        with pytest.raises(TraceError):
            HashrateTrace.read_csv(path)
        assert CSV_HEADER == "unix_seconds,relative_hashrate"


class TestReplayTrace:
    def test_constant_trace_all_ones(self):
        m = replay_trace(HashrateTrace.constant(7.0), 100, 2.0)
        assert np.all(m == 1.0)

    def test_ramp_emitted_as_steps(self):
        t = HashrateTrace.ramp(3.0, 200.0, steps=10)
        m = replay_trace(t, 101, 2.0)
        assert m[0] == 1.0
        assert m[-1] == pytest.approx(3.0)
        assert len(np.unique(m)) <= 11
        assert np.all(np.diff(m) >= 0)

    def test_normalized_to_first_round(self):
        t = HashrateTrace((0.0, 50.0), (4.0, 8.0))
        m = replay_trace(t, 51, 1.0)
        assert m[0] == 1.0
        assert m[-1] == 2.0

    def test_short_trace_fails_fast(self):
        t = HashrateTrace((0.0, 10.0), (1.0, 2.0))
        with pytest.raises(TraceError):
            replay_trace(t, 1000, 2.0)
