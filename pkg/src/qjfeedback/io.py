"""Artifact serialization: CSV/JSON/JSON-lines files with embedded provenance.

Every file written here starts with the master seed and the full resolved
configuration (``#`` comment lines for CSV, a ``meta`` record for JSON and
JSON-lines), so any artifact can be regenerated from its own header.
Timestamps are printed with 17 significant digits and probabilities with 6.
Writes go to a temporary file in the target directory and are renamed into
place.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .controller import GateCommand
from .photophysics import TrialResult
from .stats import SurvivalCurve

TRIAL_COLUMNS = ("molecule_index", "tau_t_s", "n_photons", "survival_time_s", "bleached",
                 "illuminated_triplet_s", "illuminated_time_s", "arm")


def fmt_time(x: float) -> str:
    return format(float(x), ".17g")


def fmt_prob(x: float) -> str:
    return format(float(x), ".6g")


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def header(seed: int | None, config_text: str | None, **extra) -> str:
    lines = [f"# master_seed = {seed if seed is not None else 'none'}"]
    for k, v in extra.items():
        lines.append(f"# {k} = {v}")
    if config_text:
        lines.append("# config:")
        lines.extend(f"#   {ln}" if ln else "#" for ln in config_text.rstrip("\n").split("\n"))
    return "\n".join(lines) + "\n"


def _csv(header_text: str, columns: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    buf.write(header_text)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [ln for ln in fh if ln.strip() and not ln.startswith("#")]


def read_header(path) -> dict[str, str]:
    """``key = value`` pairs of the comment header (config block excluded)."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            if not ln.startswith("#"):
                break
            body = ln[1:].strip()
            if body == "config:":
                break
            if "=" in body:
                k, v = body.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def read_config_block(path) -> str:
    """The configuration embedded in a CSV header, as parseable text."""
    lines, inside = [], False
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            if not ln.startswith("#"):
                break
            if ln.strip() == "# config:":
                inside = True
            elif inside:
                lines.append(ln[4:].rstrip("\n") if ln.startswith("#   ") else "")
    return "\n".join(lines) + "\n"


# trials

def trials_csv(results: Sequence[TrialResult], head: str) -> str:
    rows = ([str(r.molecule_index), fmt_time(r.tau_t_used), str(r.n_photons),
             fmt_time(r.survival_time), "1" if r.bleached else "0",
             fmt_time(r.illuminated_triplet_time), fmt_time(r.illuminated_time), r.arm]
            for r in results)
    return _csv(head, TRIAL_COLUMNS, rows)


def read_trials_csv(path) -> list[TrialResult]:
    reader = csv.DictReader(_data_lines(path))
    missing = set(TRIAL_COLUMNS) - set(reader.fieldnames or ()) - {"illuminated_time_s"}
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    out = []
    for row in reader:
        out.append(TrialResult(
            n_photons=int(row["n_photons"]),
            survival_time=float(row["survival_time_s"]),
            bleached=row["bleached"].strip() in ("1", "true", "True"),
            tau_t_used=float(row["tau_t_s"]),
            illuminated_triplet_time=float(row["illuminated_triplet_s"]),
            molecule_index=int(row["molecule_index"]),
            arm=row["arm"],
            illuminated_time=float(row.get("illuminated_time_s") or "nan"),
        ))
    return out


# survival curves and tables

def survival_csv(curve: SurvivalCurve, head: str, value_column: str = "value",
                 integer: bool = False) -> str:
    fmt = (lambda v: str(int(v))) if integer else fmt_time
    rows = ([fmt(v), fmt_prob(p)] for v, p in zip(curve.support, curve.probability))
    return _csv(head, (value_column, "probability"), rows)


def gain_table_csv(table, head: str) -> str:
    def num(x):
        return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else format(x, ".6g")

    rows = ([fmt_time(r.tau_d), num(r.g_measured), num(r.g_predicted), num(r.ci_low),
             num(r.ci_high), str(r.n_with), str(r.n_without), r.error or ""]
            for r in table.rows)
    cols = ("tau_d_s", "g_measured", "g_predicted", "ci_low", "ci_high", "n_with", "n_without",
            "error")
    return _csv(head, cols, rows)


def read_table_csv(path) -> list[dict[str, str]]:
    return list(csv.DictReader(_data_lines(path)))


def gate_csv(commands: Sequence[GateCommand], head: str) -> str:
    rows = ([fmt_time(c.actuate_at), c.level.value] for c in commands)
    return _csv(head, ("actuate_at", "level"), rows)


def bin_trace(photon_times, bin_width: float, end: float | None = None) -> list[tuple[float, int]]:
    """Counts in half-open bins ``[k w, (k+1) w)``.

    Bins run from 0 to ``end`` (or to the last photon when ``end`` is not
    given); empty bins appear as explicit zeros.
    """
    if not bin_width > 0 or not math.isfinite(bin_width):
        raise ValueError(f"bin width must be > 0 (got {bin_width!r})")
    t = np.asarray(photon_times, dtype=float).ravel()
    if t.size and t.min() < 0:
        raise ValueError("photon times must be >= 0")
    idx = np.floor(t / bin_width).astype(np.int64)
    # repair float rounding at bin edges so membership is exact
    idx[(idx + 1) * bin_width <= t] += 1
    idx[idx * bin_width > t] -= 1
    n = 0
    if end is not None:
        n = max(0, math.ceil(end / bin_width - 1e-9))
    if t.size:
        n = max(n, int(idx.max()) + 1)
    counts = np.bincount(idx, minlength=n) if t.size else np.zeros(n, dtype=np.int64)
    return [(k * bin_width, int(c)) for k, c in enumerate(counts.tolist())]


def trace_csv(bins: Sequence[tuple[float, int]], head: str) -> str:
    rows = ([fmt_time(s), str(c)] for s, c in bins)
    return _csv(head, ("bin_start_s", "count"), rows)


# JSON and JSON-lines

def meta_record(seed: int | None, config_text: str | None, **extra) -> dict:
    rec = {"master_seed": seed, "config": config_text}
    rec.update(extra)
    return rec


def json_text(payload: dict, meta: dict) -> str:
    body = dict(payload)
    body["meta"] = meta
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def events_jsonl(events: Iterable[tuple[float, str]], meta: dict) -> str:
    lines = [json.dumps({"kind": "meta", **meta})]
    lines.extend(json.dumps({"t": float(t), "kind": kind}) for t, kind in events)
    return "\n".join(lines) + "\n"


def read_events_jsonl(path) -> tuple[dict | None, list[tuple[float, str]]]:
    meta, events = None, []
    with open(path, encoding="utf-8") as fh:
        for n, ln in enumerate(fh, start=1):
            if not ln.strip():
                continue
            rec = json.loads(ln)
            if rec.get("kind") == "meta":
                meta = rec
                continue
            if "t" not in rec or "kind" not in rec:
                raise ValueError(f"{path}:{n}: event record needs 't' and 'kind'")
            events.append((float(rec["t"]), rec["kind"]))
    return meta, events


def read_photon_times(path) -> np.ndarray:
    """One timestamp per line (seconds); blank lines and ``#`` comments skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for n, ln in enumerate(fh, start=1):
            s = ln.split("#", 1)[0].strip()
            if not s:
                continue
            try:
                values.append(float(s))
            except ValueError:
                raise ValueError(f"{path}:{n}: not a timestamp: {s!r}") from None
    return np.asarray(values, dtype=float)
