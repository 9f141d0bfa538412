"""Analytic cost formulas, the four cost tables, and ledger reconciliation.

All formulas are affine in N, the number of middleboxes. Per-operation
costs are derived from the unit conventions of the arithmetic layers
(1.5 point ops per scalar bit, 1.5/1.75 modmuls per exponent bit for single
and double exponentiation, 1 per mod-q product) rather than typed in.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .counters import MODMULS, POINT_UNITS, TABLE_STAGES, CostLedger
from .ec import SECP256R1
from .modgroup import SCHNORR_3072

TABLE_SCT_COUNT = 3


@dataclass(frozen=True)
class Affine:
    slope: int = 0
    const: int = 0

    def __call__(self, n: int) -> int:
        return self.slope * n + self.const

    def __add__(self, other: "Affine") -> "Affine":
        return Affine(self.slope + other.slope, self.const + other.const)

    def __mul__(self, k: int) -> "Affine":
        return Affine(self.slope * k, self.const * k)

    __rmul__ = __mul__

    def format(self) -> str:
        if self.slope and self.const:
            return f"{self.slope:,}N + {self.const:,}"
        if self.slope:
            return f"{self.slope:,}N"
        return f"{self.const:,}"


def per_mb(units: int) -> Affine:
    return Affine(units, 0)


def fixed(units: int) -> Affine:
    return Affine(0, units)


@dataclass(frozen=True)
class OpCosts:
    keygen: int
    sign: int
    verify: int
    delegate: int
    derive: int
    proxy_sign: int
    proxy_verify: int


def metric_for(scheme: str) -> str:
    return {"ecdsa": POINT_UNITS, "schnorr": MODMULS}[scheme]


def operation_costs(scheme: str) -> OpCosts:
    if scheme == "ecdsa":
        mul = SECP256R1.scalar_mul_units          # 384
        one, two, product, pkp = mul, 2 * mul, 0, 2 * mul
    elif scheme == "schnorr":
        one = SCHNORR_3072.exp_units              # 384
        two = SCHNORR_3072.multi_exp_units        # 448
        product, pkp = 1, 1
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    keygen = one
    sign = one + product           # commitment, plus c*d for Schnorr
    verify = two                   # two-term combination
    derive = verify + product      # recover Y_d, then t = r + d*h
    proxy_verify = verify + pkp + verify
    return OpCosts(keygen, sign, verify, sign, derive, sign, proxy_verify)


def _phase0(c: OpCosts, sct_count: int, amortize: bool) -> tuple[int, int]:
    """(cost with fresh log keys, cost when log keys already exist)."""
    without_logs = (c.keygen + c.sign) + c.verify + sct_count * c.sign + (c.keygen + c.sign)
    logs = sct_count * c.keygen
    return without_logs + logs, without_logs + (0 if amortize else logs)


def stage_formula(mode: str, scheme: str, stage: str, sct_count: int = TABLE_SCT_COUNT,
                  amortize_log_keys: bool = False) -> Affine:
    if mode not in ("mdtls", "matls"):
        raise ValueError(f"unknown mode {mode!r}")
    c = operation_costs(scheme)
    if stage == "cert-gen":
        base, per_mb_matls = _phase0(c, sct_count, amortize_log_keys)
        if mode == "matls":
            return Affine(per_mb_matls, base)
        return Affine(c.keygen + c.delegate + c.derive + c.proxy_sign, base)
    if stage == "cert-verify":
        cert = (1 + sct_count) * c.verify
        return Affine(cert if mode == "matls" else c.proxy_verify, cert)
    if stage == "spb":
        return Affine(c.sign + c.verify, c.sign + c.verify)
    raise ValueError(f"unknown or untabulated stage {stage!r}")


def analytic_stage_cost(mode: str, scheme: str, stage: str, n: int,
                        sct_count: int = TABLE_SCT_COUNT, amortize_log_keys: bool = False) -> int:
    if n < 0:
        raise ValueError("N must be >= 0")
    return stage_formula(mode, scheme, stage, sct_count, amortize_log_keys)(n)


def total_formula(mode: str, scheme: str, sct_count: int = TABLE_SCT_COUNT,
                  amortize_log_keys: bool = False) -> Affine:
    out = Affine()
    for stage in TABLE_STAGES:
        out = out + stage_formula(mode, scheme, stage, sct_count, amortize_log_keys)
    return out


def analytic_total(mode: str, scheme: str, n: int, sct_count: int = TABLE_SCT_COUNT,
                   amortize_log_keys: bool = False) -> int:
    if n < 0:
        raise ValueError("N must be >= 0")
    return total_formula(mode, scheme, sct_count, amortize_log_keys)(n)


def asymptotic_reduction(scheme: str) -> float:
    ma, md = total_formula("matls", scheme), total_formula("mdtls", scheme)
    return 1 - md.slope / ma.slope


# Tables ---------------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    description: str
    matls: Affine | None = None
    mdtls: Affine | None = None
    section: bool = False


@dataclass(frozen=True)
class CostTable:
    number: int
    caption: str
    first_header: str
    rows: tuple

    def cells(self) -> list[tuple[str, str, str]]:
        out = []
        for r in self.rows:
            if r.section:
                out.append((r.description, "", ""))
            else:
                out.append((r.description, _cell(r.matls), _cell(r.mdtls)))
        return out

    def data_rows(self) -> list[Row]:
        return [r for r in self.rows if not r.section]


def _cell(v: Affine | None) -> str:
    return "-" if v is None else v.format()


def _table2() -> CostTable:
    c = operation_costs("ecdsa")
    return CostTable(2, "Computational analysis for security parameter blocks", "Descriptions", (
        Row("Server generates security parameter blocks.", fixed(c.sign), fixed(c.sign)),
        Row("Middlebox generates security parameter blocks.", per_mb(c.sign), per_mb(c.sign)),
        Row("Client verifies blocks from the server.", fixed(c.verify), fixed(c.verify)),
        Row("Client verifies blocks from the middleboxes.", per_mb(c.verify), per_mb(c.verify)),
    ))


def _table3() -> CostTable:
    c, k = operation_costs("ecdsa"), TABLE_SCT_COUNT
    pair = c.keygen + c.sign
    return CostTable(3, "Computational analysis for generating certificates", "Descriptions", (
        Row("- Server side", section=True),
        Row("Server generates keys and signature for CSR to CA.", fixed(pair), fixed(pair)),
        Row("CA verifies CSR signature.", fixed(c.verify), fixed(c.verify)),
        Row("CT log servers generate keys and signatures for 3 SCTs.", fixed(k * pair), fixed(k * pair)),
        Row("CA generates keys and signs for server's certificate.", fixed(pair), fixed(pair)),
        Row("- Middlebox side for maTLS", section=True),
        Row("Middleboxes generate keys and signature for CSR to CA.", per_mb(pair), None),
        Row("CA verifies CSR signature.", per_mb(c.verify), None),
        Row("MT log servers generate keys and signatures for 3 SCTs.", per_mb(k * pair), None),
        Row("CA generates keys and signs for middleboxes' certificate.", per_mb(pair), None),
        Row("- Middlebox side for mdTLS", section=True),
        Row("Each middlebox generates its keys.", None, per_mb(c.keygen)),
        Row("Server generates signed delegations to assign proxy signers.", None, per_mb(c.delegate)),
        Row("Middlebox verifies signed delegation and generate proxy signing key.", None,
            per_mb(c.derive)),
        Row("Middleboxes generate certificates with proxy signing key.", None, per_mb(c.proxy_sign)),
    ))


def _table4() -> CostTable:
    c, k = operation_costs("ecdsa"), TABLE_SCT_COUNT
    cert = (1 + k) * c.verify
    return CostTable(4, "Computational analysis for certificates verification", "Descriptions", (
        Row("Client verifies the signature and 3 SCTs in the server's certificate.",
            fixed(cert), fixed(cert)),
        Row("Client verifies the middleboxes' certificates.", per_mb(cert), per_mb(c.proxy_verify)),
    ))


def _table5() -> CostTable:
    f = lambda mode, stage: stage_formula(mode, "schnorr", stage)
    return CostTable(5, "Modular multiplications in maTLS and mdTLS", "Stages", (
        Row("Certificate generation", f("matls", "cert-gen"), f("mdtls", "cert-gen")),
        Row("Certificate verification", f("matls", "cert-verify"), f("mdtls", "cert-verify")),
        Row("Security parameter blocks", f("matls", "spb"), f("mdtls", "spb")),
        Row("Overall", total_formula("matls", "schnorr"), total_formula("mdtls", "schnorr")),
    ))


TABLE_IDS = (2, 3, 4, 5)
TABLE_STAGE_OF = {2: "spb", 3: "cert-gen", 4: "cert-verify"}


def get_table(number: int) -> CostTable:
    builders = {2: _table2, 3: _table3, 4: _table4, 5: _table5}
    if number not in builders:
        raise ValueError(f"unknown table {number}; choose from {TABLE_IDS}")
    return builders[number]()


def render_table(number: int, fmt: str = "md") -> str:
    table = get_table(number)
    header = (table.first_header, "maTLS", "mdTLS")
    cells = table.cells()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(cells)
        return buf.getvalue()
    if fmt != "md":
        raise ValueError(f"unknown format {fmt!r}")
    widths = [max(len(r[i]) for r in [header, *cells]) for i in range(3)]
    line = lambda r: "| " + " | ".join(v.ljust(w) for v, w in zip(r, widths)) + " |"
    out = [f"Table {number}: {table.caption}", "", line(header),
           "| " + " | ".join("-" * w for w in widths) + " |"]
    out.extend(line(r) for r in cells)
    return "\n".join(out) + "\n"


# Reconciliation --------------------------------------------------------------

@dataclass(frozen=True)
class StageReport:
    stage: str
    instrumented: int
    analytic: int | None
    stochastic: int

    @property
    def included(self) -> bool:
        return self.analytic is not None

    @property
    def delta(self) -> int | None:
        return None if self.analytic is None else self.instrumented - self.analytic

    @property
    def status(self) -> str:
        if not self.included:
            return "excluded"
        return "PASS" if self.delta == 0 else "FAIL"


@dataclass(frozen=True)
class ReconcileReport:
    mode: str
    scheme: str
    n: int
    metric: str
    stages: tuple

    @property
    def passed(self) -> bool:
        return all(s.status != "FAIL" for s in self.stages)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    @property
    def overall(self) -> int:
        return sum(s.instrumented for s in self.stages if s.included)

    def failures(self) -> list[StageReport]:
        return [s for s in self.stages if s.status == "FAIL"]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "scheme": self.scheme, "middleboxes": self.n,
            "metric": self.metric, "status": self.status, "overall": self.overall,
            "stages": [
                {"stage": s.stage, "instrumented": s.instrumented, "analytic": s.analytic,
                 "delta": s.delta, "status": s.status, "stochastic": s.stochastic}
                for s in self.stages
            ],
        }

    def to_rows(self) -> list[list]:
        return [[s.stage, s.instrumented, "" if s.analytic is None else s.analytic,
                 "" if s.delta is None else s.delta, s.status, s.stochastic] for s in self.stages]


def reconcile(ledger: CostLedger, mode: str, scheme: str, n: int,
              sct_count: int = TABLE_SCT_COUNT, amortize_log_keys: bool = False) -> ReconcileReport:
    """Compare fixed-convention ledger units per stage against the formulas."""
    metric = metric_for(scheme)
    stages = []
    for stage in ("cert-gen", "cert-verify", "spb", "ecdh", "record", "aux"):
        analytic = (analytic_stage_cost(mode, scheme, stage, n, sct_count, amortize_log_keys)
                    if stage in TABLE_STAGES else None)
        stages.append(StageReport(stage, ledger.get(stage, metric), analytic,
                                  ledger.stochastic(stage, metric)))
    return ReconcileReport(mode, scheme, n, metric, tuple(stages))


def compare_rows(n_max: int, scheme: str) -> list[dict]:
    """Per-N totals of both modes with overall and marginal reduction ratios."""
    if n_max < 1:
        raise ValueError("n-max must be >= 1")
    ma, md = total_formula("matls", scheme), total_formula("mdtls", scheme)
    asym = asymptotic_reduction(scheme)
    rows = []
    for n in range(n_max + 1):
        rows.append({
            "N": n,
            "matls_total": ma(n),
            "mdtls_total": md(n),
            "reduction": round(1 - md(n) / ma(n), 6),
            "marginal_reduction": round(1 - md.slope / ma.slope, 6),
            "asymptotic_reduction": round(asym, 6),
        })
    return rows
