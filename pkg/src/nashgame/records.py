"""Run records: per-iteration metrics plus enough context to replay a run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CSV_HEADER = "iter,kl_star_pi,kl_pi_star,dualgap_beta,dualgap,residual"


@dataclass(frozen=True)
class MetricRow:
    """Diagnostics of one recorded iterate against the certified equilibrium."""

    iter: int
    kl_star_pi: float
    kl_pi_star: float
    dualgap_beta: float
    dualgap: float
    residual: float

    def to_csv_line(self) -> str:
        vals = (self.kl_star_pi, self.kl_pi_star, self.dualgap_beta, self.dualgap, self.residual)
        return ",".join([str(self.iter)] + [format(v, ".17g") for v in vals])

    @classmethod
    def from_csv_line(cls, line: str) -> "MetricRow":
        parts = line.strip().split(",")
        return cls(int(parts[0]), *(float(p) for p in parts[1:6]))


@dataclass
class RunRecord:
    """Everything a single solver run produced.

    ``wall_clock_s`` is excluded from identity comparisons; all other fields
    are byte-reproducible for a fixed config and seed.
    """

    config: dict
    certificate: dict
    rows: list[MetricRow]
    final_logits: list[float]
    status: str = "ok"
    error: str | None = None
    rng_draws: int = 0
    half_rows: list[MetricRow] = field(default_factory=list)
    checkpoint_path: str | None = None
    wall_clock_s: float = 0.0

    def final_metrics(self) -> MetricRow:
        return self.rows[-1]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "certificate": self.certificate,
            "rows": [list(_row_tuple(r)) for r in self.rows],
            "half_rows": [list(_row_tuple(r)) for r in self.half_rows],
            "final_logits": [float(x) for x in self.final_logits],
            "status": self.status,
            "error": self.error,
            "rng_draws": self.rng_draws,
            "checkpoint_path": self.checkpoint_path,
            "wall_clock_s": self.wall_clock_s,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(
            config=data["config"],
            certificate=data["certificate"],
            rows=[MetricRow(int(r[0]), *map(float, r[1:])) for r in data["rows"]],
            half_rows=[MetricRow(int(r[0]), *map(float, r[1:])) for r in data.get("half_rows", [])],
            final_logits=[float(x) for x in data["final_logits"]],
            status=data.get("status", "ok"),
            error=data.get("error"),
            rng_draws=int(data.get("rng_draws", 0)),
            checkpoint_path=data.get("checkpoint_path"),
            wall_clock_s=float(data.get("wall_clock_s", 0.0)),
        )

    def identity_dict(self) -> dict:
        """The record with wall-clock stripped, for byte-identity checks."""
        d = self.to_dict()
        d.pop("wall_clock_s")
        return d


def _row_tuple(r: MetricRow) -> tuple:
    return (r.iter, r.kl_star_pi, r.kl_pi_star, r.dualgap_beta, r.dualgap, r.residual)


def rows_to_csv(rows: list[MetricRow]) -> str:
    return "\n".join([CSV_HEADER] + [r.to_csv_line() for r in rows]) + "\n"


def rows_from_csv(text: str) -> list[MetricRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError("missing or malformed metrics header")
    return [MetricRow.from_csv_line(ln) for ln in lines[1:]]


def is_finite_row(row: MetricRow) -> bool:
    vals = (row.kl_star_pi, row.kl_pi_star, row.dualgap_beta, row.dualgap, row.residual)
    return all(np.isfinite(v) for v in vals)
