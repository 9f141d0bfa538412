"""Operation counters and the per-stage cost ledger.

A session owns one :class:`OpCounter`. Arithmetic routines bump raw tallies
(what the algorithms really executed) and charge fixed-convention units (the
affine model the cost tables are written in) against whichever stage is
active.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

STAGES = ("cert-gen", "cert-verify", "spb", "ecdh", "record", "aux")
TABLE_STAGES = ("cert-gen", "cert-verify", "spb")

POINT_UNITS = "point-op-units"
MODMULS = "modular-multiplications"
METRICS = (POINT_UNITS, MODMULS)

RAW_FIELDS = (
    "point_doublings",
    "point_additions",
    "scalar_multiplications",
    "modular_multiplications",
    "modular_exponentiations",
    "multi_exponentiations",
    "scalar_products",
)


class OpCounter:
    """Mutable tally of group operations, bucketed by protocol stage."""

    def __init__(self, stage: str = "aux"):
        self._check(stage)
        self.stage = stage
        self._raw = {s: dict.fromkeys(RAW_FIELDS, 0) for s in STAGES}
        self._units = {s: dict.fromkeys(METRICS, 0) for s in STAGES}

    @staticmethod
    def _check(stage: str) -> None:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")

    @contextmanager
    def at(self, stage: str):
        self._check(stage)
        previous, self.stage = self.stage, stage
        try:
            yield self
        finally:
            self.stage = previous

    def bump(self, name: str, n: int = 1) -> None:
        self._raw[self.stage][name] += n

    def charge(self, metric: str, units: int) -> None:
        self._units[self.stage][metric] += units

    def raw(self, name: str, stage: str | None = None) -> int:
        if stage is not None:
            return self._raw[stage][name]
        return sum(bucket[name] for bucket in self._raw.values())

    def units(self, metric: str, stage: str | None = None) -> int:
        if stage is not None:
            return self._units[stage][metric]
        return sum(bucket[metric] for bucket in self._units.values())

    # Shorthand views over all stages, mostly for tests.
    @property
    def point_doublings(self) -> int:
        return self.raw("point_doublings")

    @property
    def point_additions(self) -> int:
        return self.raw("point_additions")

    @property
    def scalar_multiplications(self) -> int:
        return self.raw("scalar_multiplications")

    @property
    def modular_multiplications(self) -> int:
        return self.raw("modular_multiplications")

    @property
    def modular_exponentiations(self) -> int:
        return self.raw("modular_exponentiations")

    @property
    def multi_exponentiations(self) -> int:
        return self.raw("multi_exponentiations")

    def ledger(self) -> "CostLedger":
        return CostLedger(
            units={s: dict(v) for s, v in self._units.items()},
            raw={s: dict(v) for s, v in self._raw.items()},
        )


@dataclass(frozen=True)
class CostLedger:
    """Immutable snapshot of an :class:`OpCounter`."""

    units: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def get(self, stage: str, metric: str) -> int:
        return self.units[stage][metric]

    def total(self, metric: str, stages=TABLE_STAGES) -> int:
        return sum(self.units[s][metric] for s in stages)

    def stochastic(self, stage: str, metric: str) -> int:
        """Executed-operation tally matching ``metric``'s unit of account."""
        raw = self.raw[stage]
        if metric == POINT_UNITS:
            return raw["point_doublings"] + raw["point_additions"]
        return raw["modular_multiplications"] + raw["scalar_products"]

    def to_dict(self) -> dict:
        return {
            stage: {"units": self.units[stage], "raw": self.raw[stage]}
            for stage in STAGES
        }
