import json
import os

import numpy as np
import pytest

from qjfeedback import io as qio
from qjfeedback.config import format_config, parse_config, preset_config
from qjfeedback.controller import GateCommand, Level
from qjfeedback.photophysics import TrialResult
from qjfeedback.stats import survival_curve


class TestBinTrace:
    def test_example(self):
        assert qio.bin_trace([0.5e-3, 1.5e-3, 2.5e-3], 1e-3) == [
            (0.0, 1), (1e-3, 1), (2e-3, 1)]

    def test_empty_with_end(self):
        assert qio.bin_trace([], 1e-3, end=3e-3) == [(0.0, 0), (1e-3, 0), (2e-3, 0)]

    def test_edges_half_open(self):
        w = 0.1
        t = [0.0, 0.1, 0.3, 0.30000000000000004]
        counts = [c for _, c in qio.bin_trace(t, w)]
        # 0.3 == 3 * 0.1 is not exact in binary; membership follows k*w <= t < (k+1)*w
        for (start, c), k in zip(qio.bin_trace(t, w), range(10)):
            assert c == sum(k * w <= x < (k + 1) * w for x in t)
        assert sum(counts) == len(t)

    def test_trailing_zeros(self):
        bins = qio.bin_trace([0.5], 1.0, end=4.0)
        assert [c for _, c in bins] == [1, 0, 0, 0]

    def test_bad_width(self):
        with pytest.raises(ValueError):
            qio.bin_trace([1.0], 0.0)
        with pytest.raises(ValueError):
            qio.bin_trace([1.0], -1e-3)

    def test_poisson_fano(self):
        rng = np.random.default_rng(0)
        rate, w, n = 3e4, 1e-3, 10_000
        t = np.cumsum(rng.exponential(1 / rate, int(rate * w * n * 1.1)))
        t = t[t < w * n]
        counts = np.array([c for _, c in qio.bin_trace(t, w, end=w * n)])
        assert counts.size == n
        assert abs(counts.mean() / (rate * w) - 1) < 0.01
        assert abs(counts.var() / counts.mean() - 1) < 0.05


class TestFiles:
    def test_atomic_write(self, tmp_path):
        p = qio.atomic_write(tmp_path / "a" / "x.csv", "hello\n")
        assert p.read_text() == "hello\n"
        assert [f.name for f in p.parent.iterdir()] == ["x.csv"]
        assert os.stat(p).st_mode & 0o044

    def test_trials_round_trip(self, tmp_path):
        rs = [TrialResult(10, 0.123456789012345678, True, 2.4e-4, 1e-3, 0, "with", 0.1),
              TrialResult(7, 1 / 3, False, 1e-4, 0.0, 1, "with", 1 / 3)]
        cfg = preset_config("dii")
        path = tmp_path / "t.csv"
        qio.atomic_write(path, qio.trials_csv(rs, qio.header(5, format_config(cfg))))
        assert qio.read_trials_csv(path) == rs
        assert qio.read_header(path)["master_seed"] == "5"
        assert parse_config(qio.read_config_block(path)) == cfg

    def test_survival_csv(self, tmp_path):
        text = qio.survival_csv(survival_curve([1, 2, 3]), qio.header(1, None), "n", True)
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        assert lines == ["n,probability", "1,1", "2,0.666667", "3,0.333333"]

    def test_gate_csv_17_digits(self):
        text = qio.gate_csv([GateCommand(70.6e-6, Level.OFF)], "")
        row = text.splitlines()[1]
        assert row == "7.0599999999999995e-05,OFF"
        assert float(row.split(",")[0]) == 70.6e-6

    def test_events_jsonl(self, tmp_path):
        path = tmp_path / "e.jsonl"
        events = [(0.0, "gate_on"), (1e-5, "photon"), (2e-5, "bleach")]
        qio.atomic_write(path, qio.events_jsonl(events, qio.meta_record(3, "x")))
        meta, back = qio.read_events_jsonl(path)
        assert meta["master_seed"] == 3 and back == events
        first = json.loads(path.read_text().splitlines()[1])
        assert first == {"t": 0.0, "kind": "gate_on"}

    def test_photon_file(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("# header\n1e-6\n\n2.5E-05\n3\n")
        assert qio.read_photon_times(path).tolist() == [1e-6, 2.5e-5, 3.0]
        path.write_text("1e-6\nabc\n")
        with pytest.raises(ValueError, match=":2:"):
            qio.read_photon_times(path)
