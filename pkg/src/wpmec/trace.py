"""Per-slot episode records and the CSV conventions shared by every output.

Floats are written with ``repr`` so rows parse back to the identical value.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .env import SlotOutcome


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_csv(header, rows), encoding="utf-8")
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@dataclass
class EpisodeTrace:
    m_haps: int
    rows: list[tuple] = field(default_factory=list)

    @property
    def header(self) -> list[str]:
        return (["t", "psi", "demand_met", "n_local", "n_edge", "n_dropped"]
                + [f"e1_{m + 1}" for m in range(self.m_haps)]
                + [f"e2_{m + 1}" for m in range(self.m_haps)])

    def record(self, t: int, out: SlotOutcome) -> None:
        self.rows.append((t, out.psi, out.demand_met, out.n_local, out.n_edge, out.n_dropped,
                          *map(float, out.e1), *map(float, out.e2)))

    def to_csv(self) -> str:
        return to_csv(self.header, self.rows)

    def write(self, path: str | Path) -> Path:
        return write_csv(path, self.header, self.rows)
