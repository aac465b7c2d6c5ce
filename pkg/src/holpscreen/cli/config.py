"""Experiment configuration files and the campaign runner.

Configs are versioned JSON.  A campaign writes one ``report.csv`` row per
experiment plus a ``config.resolved.json`` sidecar with every seed made
explicit, so a run can be reproduced byte for byte; wall-clock summaries
go to a separate ``timings.csv`` to keep ``report.csv`` deterministic.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..exceptions import ConfigError
from ..metrics import (
    ExperimentReport,
    run_experiment,
    separation_probability,
)
from ..modelselect import EbicSized, PipelineSpec
from ..screeners import Threshold, TopD
from ..simgen import SimScenario
from .figures import emit_curves

__all__ = [
    "METHOD_TOKENS",
    "ExperimentEntry",
    "FigureSpec",
    "ExperimentConfig",
    "run_campaign",
    "read_report_csv",
]

SCHEMA_VERSION = 1

# CLI/config method tokens -> internal screener names.
METHOD_TOKENS = {
    "holp": "holp",
    "ridge-holp": "ridge_holp",
    "divide-holp": "divide_holp",
    "sis": "sis",
    "rrcs": "rrcs",
    "fr": "forward_regression",
    "null": "null",
}
_TOKEN_OF = {v: k for k, v in METHOD_TOKENS.items()}

_REPORT_COLUMNS = [
    "label",
    "kind",
    "method",
    "refiner",
    "rule",
    "family",
    "n",
    "p",
    "rho",
    "k",
    "delta2",
    "r_squared",
    "support_size",
    "seed",
    "replicates",
    "inclusion_probability",
    "separation_probability",
    "exact_rate",
    "mean_false_negatives",
    "sd_false_negatives",
    "mean_false_positives",
    "sd_false_positives",
    "mean_size",
    "sd_size",
    "mean_l2_error",
    "sd_l2_error",
]


def _rule_to_dict(rule) -> dict:
    if isinstance(rule, TopD):
        return {"top_d": rule.d}
    if isinstance(rule, Threshold):
        return {"gamma": rule.gamma}
    if isinstance(rule, EbicSized):
        return {"ebic_dmax": rule.dmax}
    raise ConfigError(f"unknown rule {rule!r}")


def _rule_from_dict(d: dict):
    if len(d) != 1:
        raise ConfigError(f"rule must have exactly one key, got {sorted(d)}")
    if "top_d" in d:
        return TopD(int(d["top_d"]))
    if "gamma" in d:
        return Threshold(float(d["gamma"]))
    if "ebic_dmax" in d:
        return EbicSized(int(d["ebic_dmax"]))
    raise ConfigError(f"unknown rule key {sorted(d)}")


@dataclass(frozen=True)
class ExperimentEntry:
    """One (scenario, method, rule) cell of a campaign."""

    label: str
    kind: str  # "screen" | "pipeline" | "separation"
    scenario: SimScenario
    method: str  # internal screener name
    rule: TopD | Threshold | EbicSized | None
    replicates: int
    refiner: str = "none"
    method_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("screen", "pipeline", "separation"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.method not in METHOD_TOKENS.values():
            raise ConfigError(f"unknown method {self.method!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.kind != "separation" and self.rule is None:
            raise ConfigError(f"experiment {self.label!r} needs a rule")
        if self.kind == "screen" and self.refiner != "none":
            raise ConfigError("screen experiments cannot carry a refiner")

    def to_dict(self) -> dict:
        out = {
            "label": self.label,
            "kind": self.kind,
            "scenario": self.scenario.to_dict(),
            "method": _TOKEN_OF[self.method],
            "replicates": self.replicates,
        }
        if self.rule is not None:
            out["rule"] = _rule_to_dict(self.rule)
        if self.refiner != "none":
            out["refiner"] = self.refiner
        if self.method_params:
            out["method_params"] = self.method_params
        return out


@dataclass(frozen=True)
class FigureSpec:
    """Line-plot request over the reports of listed experiments."""

    path: str
    x: str  # scenario field used for the x axis ("n", "p", "rho", ...)
    experiments: tuple
    y: str = "inclusion_probability"
    title: str = ""

    def to_dict(self) -> dict:
        out = {"path": self.path, "x": self.x, "experiments": list(self.experiments)}
        if self.y != "inclusion_probability":
            out["y"] = self.y
        if self.title:
            out["title"] = self.title
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    """A full campaign: seeded experiments plus optional figures."""

    seed: int
    experiments: tuple
    figures: tuple = ()
    threads: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        labels = [e.label for e in self.experiments]
        if len(labels) != len(set(labels)):
            raise ConfigError("experiment labels must be unique")

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "threads": self.threads,
            "experiments": [e.to_dict() for e in self.experiments],
            "figures": [f.to_dict() for f in self.figures],
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, raw: dict, *, seed=None, threads=None) -> "ExperimentConfig":
        """Build a config; ``seed`` replaces the global seed and every
        scenario seed that inherited it (explicitly different scenario
        seeds are deliberate and stay put)."""
        if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema_version {raw.get('schema_version')!r}"
            )
        file_seed = int(raw.get("seed", 0))
        base_seed = int(seed) if seed is not None else file_seed
        entries = []
        for i, e in enumerate(raw.get("experiments", [])):
            try:
                scen = dict(e["scenario"])
                if scen.get("seed", file_seed) == file_seed:
                    scen["seed"] = base_seed
                token = e["method"]
                method = METHOD_TOKENS.get(token)
                if method is None:
                    raise ConfigError(f"unknown method token {token!r}")
                entries.append(
                    ExperimentEntry(
                        label=e["label"],
                        kind=e.get("kind", "screen"),
                        scenario=SimScenario.from_dict(scen),
                        method=method,
                        rule=_rule_from_dict(e["rule"]) if "rule" in e else None,
                        replicates=int(e["replicates"]),
                        refiner=e.get("refiner", "none"),
                        method_params=dict(e.get("method_params", {})),
                    )
                )
            except KeyError as exc:
                raise ConfigError(f"experiment {i}: missing field {exc}") from exc
        figures = tuple(
            FigureSpec(
                path=f["path"],
                x=f["x"],
                experiments=tuple(f["experiments"]),
                y=f.get("y", "inclusion_probability"),
                title=f.get("title", ""),
            )
            for f in raw.get("figures", [])
        )
        return cls(
            seed=base_seed,
            experiments=tuple(entries),
            figures=figures,
            threads=int(threads if threads is not None else raw.get("threads", 1)),
        )

    @classmethod
    def load(cls, path, *, seed=None, threads=None) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(raw, seed=seed, threads=threads)


def _run_entry(entry: ExperimentEntry, threads: int) -> ExperimentReport:
    if entry.kind == "separation":
        value = separation_probability(
            entry.scenario,
            entry.method,
            entry.replicates,
            screener_params=entry.method_params,
            threads=threads,
        )
        return ExperimentReport(
            label=entry.label,
            method=entry.method,
            scenario=entry.scenario,
            replicates=entry.replicates,
            inclusion_probability=float("nan"),
            exact_rate=float("nan"),
            mean_false_negatives=float("nan"),
            sd_false_negatives=float("nan"),
            mean_false_positives=float("nan"),
            sd_false_positives=float("nan"),
            mean_size=float("nan"),
            sd_size=float("nan"),
            mean_l2_error=None,
            sd_l2_error=None,
            separation_probability=value,
        )
    pipeline = PipelineSpec(
        screener=entry.method,
        rule=entry.rule,
        refiner=entry.refiner if entry.kind == "pipeline" else "none",
        screener_params=entry.method_params,
    )
    return run_experiment(
        entry.scenario,
        pipeline,
        entry.replicates,
        label=entry.label,
        threads=threads,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest round-trip decimal
    return str(value)


def _report_row(entry: ExperimentEntry, report: ExperimentReport) -> dict:
    scen = entry.scenario
    return {
        "label": entry.label,
        "kind": entry.kind,
        "method": _TOKEN_OF[entry.method],
        "refiner": entry.refiner,
        "rule": json.dumps(_rule_to_dict(entry.rule)) if entry.rule else "",
        "family": scen.family.value,
        "n": scen.n,
        "p": scen.p,
        "rho": scen.rho,
        "k": scen.k,
        "delta2": scen.delta2,
        "r_squared": scen.r_squared,
        "support_size": scen.support_size,
        "seed": scen.seed,
        "replicates": report.replicates,
        "inclusion_probability": report.inclusion_probability,
        "separation_probability": report.separation_probability,
        "exact_rate": report.exact_rate,
        "mean_false_negatives": report.mean_false_negatives,
        "sd_false_negatives": report.sd_false_negatives,
        "mean_false_positives": report.mean_false_positives,
        "sd_false_positives": report.sd_false_positives,
        "mean_size": report.mean_size,
        "sd_size": report.sd_size,
        "mean_l2_error": report.mean_l2_error,
        "sd_l2_error": report.sd_l2_error,
    }


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def _emit_config_figures(config, reports_by_label, out_dir, log):
    for spec in config.figures:
        series = {}
        for label in spec.experiments:
            if label not in reports_by_label:
                raise ConfigError(f"figure {spec.path}: unknown experiment {label!r}")
            entry, report = reports_by_label[label]
            xval = getattr(entry.scenario, spec.x, None)
            if xval is None:
                raise ConfigError(
                    f"figure {spec.path}: scenario field {spec.x!r} is unset "
                    f"for {label!r}"
                )
            yval = getattr(report, spec.y)
            series.setdefault(_TOKEN_OF[entry.method], []).append((xval, yval))
        plotted = [
            (meth, [q[0] for q in sorted(pts)], [q[1] for q in sorted(pts)])
            for meth, pts in sorted(series.items())
        ]
        target = out_dir / spec.path
        emit_curves(
            plotted, target, title=spec.title, xlabel=spec.x, ylabel=spec.y
        )
        log(f"wrote {target}")


def run_campaign(config: ExperimentConfig, out_dir, *, log=print) -> int:
    """Execute every experiment; returns a process exit status.

    Partial results are flushed before aborting on a failure, and the
    resolved config (seeds explicit) is always written next to the
    reports.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config.save(out_dir / "config.resolved.json")

    rows, timing_rows = [], []
    reports_by_label = {}
    failure = None
    for entry in config.experiments:
        try:
            report = _run_entry(entry, config.threads)
        except Exception as exc:  # flush partials, then abort
            failure = (entry.label, exc)
            break
        rows.append(_report_row(entry, report))
        timing_rows.append(
            {"label": entry.label, "mean_wall_time_s": report.mean_wall_time_s}
        )
        reports_by_label[entry.label] = (entry, report)
        log(f"[{entry.label}] done ({entry.replicates} replicates)")

    _write_csv(out_dir / "report.csv", _REPORT_COLUMNS, rows)
    _write_csv(out_dir / "timings.csv", ["label", "mean_wall_time_s"], timing_rows)

    if failure is None:
        _emit_config_figures(config, reports_by_label, out_dir, log)
        log(f"wrote {out_dir / 'report.csv'} ({len(rows)} experiment(s))")
        return 0
    label, exc = failure
    print(
        f"campaign aborted at experiment {label!r}: {exc} "
        f"({len(rows)} completed experiment(s) flushed)",
        file=sys.stderr,
    )
    return 1


def read_report_csv(path) -> list[dict]:
    """Parse a report.csv back into typed rows (floats, ints, None)."""
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            typed = {}
            for key, raw in row.items():
                if raw == "":
                    typed[key] = None
                elif key in ("n", "p", "seed", "replicates", "support_size", "k"):
                    typed[key] = int(raw)
                elif key in ("label", "kind", "method", "refiner", "rule", "family"):
                    typed[key] = raw
                else:
                    typed[key] = float(raw)
            out.append(typed)
    return out
