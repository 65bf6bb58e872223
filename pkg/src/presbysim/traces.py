"""Sensor trace and command-log CSV formats.

Trace:        ``t_ms,distance_mm,temp_c``
Command log:  ``t_ms,power_left_d,power_right_d,region,clamped``
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

from presbysim.controller import LensCommand, SensorSample
from presbysim.errors import PresbysimError, TraceError

TRACE_HEADER = ["t_ms", "distance_mm", "temp_c"]
LOG_HEADER = ["t_ms", "power_left_d", "power_right_d", "region", "clamped"]


@dataclass
class ScenarioTrace:
    samples: list[SensorSample] = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    def validate(self):
        for i, (a, b) in enumerate(zip(self.samples, self.samples[1:]), start=1):
            if b.t_ms <= a.t_ms:
                raise TraceError(f"sample {i}: timestamp {b.t_ms} not after {a.t_ms}")


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def parse_trace(stream: TextIO) -> ScenarioTrace:
    """Parse and validate a trace; errors carry the offending line number."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise TraceError("missing header", line=1)
    if [h.strip() for h in header] != TRACE_HEADER:
        raise TraceError(f"expected header {','.join(TRACE_HEADER)}", line=1)
    samples: list[SensorSample] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise TraceError(f"expected 3 fields, got {len(row)}", line=line)
        try:
            temp = float(row[2])
            if not math.isfinite(temp):
                raise ValueError("non-finite temperature")
            sample = SensorSample(_parse_int(row[0]), _parse_int(row[1]), temp)
        except (ValueError, PresbysimError) as exc:
            raise TraceError(str(exc), line=line) from None
        if samples and sample.t_ms <= samples[-1].t_ms:
            raise TraceError(
                f"timestamp {sample.t_ms} not after {samples[-1].t_ms}", line=line)
        samples.append(sample)
    return ScenarioTrace(samples)


def read_trace(path: str | Path) -> ScenarioTrace:
    with open(path, newline="") as fh:
        return parse_trace(fh)


def write_trace(trace: ScenarioTrace, path: str | Path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for s in trace.samples:
            w.writerow([s.t_ms, s.distance_mm, repr(float(s.temp_c))])


def _decimals(quantum: float) -> int:
    return max(0, -math.floor(math.log10(quantum) + 1e-9))


def format_power(power: float, quantum: float = 0.1) -> str:
    if power == 0:
        power = 0.0  # no "-0.0" in logs
    return f"{power:.{_decimals(quantum)}f}"


def format_command_log(commands: Iterable[LensCommand], quantum: float = 0.1) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_HEADER)
    for c in commands:
        w.writerow([
            c.t_ms,
            format_power(c.power_left, quantum),
            format_power(c.power_right, quantum),
            c.region.value,
            "true" if c.clamped else "false",
        ])
    return buf.getvalue()


def write_command_log(commands: Iterable[LensCommand], path: str | Path, quantum: float = 0.1):
    Path(path).write_text(format_command_log(commands, quantum))
