"""Command-line campaigns: config ingestion, check orchestration and report emission.

Exit status: 0 when every asserted check passes, 1 when one fails (or a state
is refused by its tail bound), 2 for unusable configs or arguments.
"""
from __future__ import annotations

import argparse
import copy
import csv
import datetime
import hashlib
import io
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, assembly, model, vcs, verify
from .fock import ContractError, ParameterError, TruncationSpec, hermiticity_defect
from .model import ModelParams

log = logging.getLogger("gkvcs")

CHECKS = ("normalization", "continuity", "temporal_stability", "negative_control", "action_identity", "resolution")

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "truncation"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["N", "M", "omega", "epsilon"],
            "properties": {
                "N": {"type": "integer", "minimum": 1},
                "M": {"type": "integer", "minimum": 1},
                "omega": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}}]},
                "epsilon": _NUMS,
                "g_diag": _NUMS,
                "g_extra": {"type": "array", "items": {"type": "array", "items": _NUMS}},
                "Omega": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "g_prime": _NUM,
                "x_mode": {"enum": list(model.X_MODES)},
            },
        },
        "truncation": {
            "type": "object",
            "additionalProperties": False,
            "required": ["boson_cutoffs"],
            "properties": {
                "boson_cutoffs": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "cm_cutoff": {"type": ["integer", "null"], "minimum": 0},
                "tail_tolerance": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "families": {"type": "array", "items": {"enum": sorted(vcs.FAMILIES)}},
        "checks": {"type": "array", "items": {"enum": list(CHECKS)}},
        "sectors": {
            "oneOf": [
                {"const": "all"},
                {"type": "array", "items": {"type": "string", "pattern": "^[01]+$"}},
            ]
        },
        "grids": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "J": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "gamma": _NUMS,
                "theta": _NUMS,
                "J_prime": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "gamma_prime": _NUMS,
                "t": {
                    "oneOf": [
                        _NUMS,
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {"count": {"type": "integer", "minimum": 1}, "span": _NUM},
                        },
                    ]
                },
                "h": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
            },
        },
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "Q": {"type": "integer", "minimum": 1},
                "K": {"type": "integer", "minimum": 1},
                "K_theta": {"type": "integer", "minimum": 1},
                "n_max": {"type": "integer", "minimum": 0},
                "degenerate_measure": {"enum": ["literal", "corrected"]},
            },
        },
        "spectrum": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "variants": {"type": "array", "items": {"enum": list(assembly.VARIANTS)}},
                "levels": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "cutoffs": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "cm_cutoff": {"type": ["integer", "null"], "minimum": 0},
            },
        },
        "moments": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "Q": {"type": "integer", "minimum": 1},
                "degenerate_N": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "degenerate_n_max": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "format": {"enum": ["ndjson", "csv", "both"]}},
        },
    },
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


# --- configuration ------------------------------------------------------------------------


@dataclass(frozen=True)
class CampaignConfig:
    raw: dict
    params: ModelParams
    spec: TruncationSpec
    tail_tolerance: float
    families: tuple[str, ...]
    checks: tuple[str, ...]
    sectors: tuple[int, ...]
    grids: dict
    quadrature: dict
    spectrum: dict
    moments: dict | None
    output: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.raw.get("name", "campaign")

    @property
    def digest(self) -> str:
        return hashlib.sha256(_canonical(self.raw).encode()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def bundled_configs() -> list[str]:
    root = resources.files("gkvcs") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_raw(source: str) -> dict:
    """Read a config from a path or a bundled name such as ``desk-n1m1``."""
    path = Path(source)
    if path.exists():
        text = path.read_text()
    else:
        bundled = resources.files("gkvcs") / "configs" / f"{source}.json"
        if not bundled.is_file():
            raise ConfigError([f"<config>: no file or bundled config named {source!r}"])
        text = bundled.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<config>: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None


def _path(err: jsonschema.ValidationError) -> str:
    parts = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
    return "$" + parts


def parse_config(raw: dict) -> CampaignConfig:
    """Validate the document and every semantic constraint before any computation."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    problems = [f"{_path(e)}: {e.message}" for e in sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))]
    if problems:
        raise ConfigError(problems)
    m = raw["model"]
    try:
        params = ModelParams(
            N=m["N"],
            M=m["M"],
            omega=tuple(np.atleast_1d(m["omega"])),
            epsilon=tuple(m["epsilon"]),
            g_diag=tuple(m["g_diag"]) if "g_diag" in m else None,
            g_extra=np.array(m["g_extra"]) if "g_extra" in m else None,
            Omega=m.get("Omega"),
            g_prime=m.get("g_prime", 0.0),
            x_mode=m.get("x_mode", "full"),
        )
    except ParameterError as exc:
        raise ConfigError([f"$.model: {exc}"]) from None
    t = raw["truncation"]
    try:
        spec = TruncationSpec(tuple(t["boson_cutoffs"]), t.get("cm_cutoff"), params.M)
    except ParameterError as exc:
        raise ConfigError([f"$.truncation: {exc}"]) from None
    if spec.N != params.N:
        problems.append(f"$.truncation.boson_cutoffs: needs {params.N} entries, got {spec.N}")
    if params.has_cm != spec.has_cm:
        problems.append("$.truncation.cm_cutoff: must be given exactly when model.Omega is")
    families = tuple(raw.get("families", ()))
    for i, fam in enumerate(families):
        fs = vcs.family_spec(fam)
        if fs.cm is not None and not params.has_cm:
            problems.append(f"$.families[{i}]: {fam!r} needs the c.m. mode (model.Omega)")
        if fs.cm is None and params.has_cm:
            problems.append(f"$.families[{i}]: {fam!r} has no c.m. label but the model has a c.m. mode")
        if fs.degenerate and not params.equal_omega:
            problems.append(f"$.families[{i}]: {fam!r} needs equal boson frequencies")
        if fs.variant == "extradiag":
            try:
                model.effective_eps_NM(params)
            except ParameterError as exc:
                problems.append(f"$.families[{i}]: {exc}")
    if "sectors" in raw and raw["sectors"] != "all":
        sectors = []
        for i, bits in enumerate(raw["sectors"]):
            if len(bits) != params.M:
                problems.append(f"$.sectors[{i}]: {bits!r} needs {params.M} bits")
            else:
                sectors.append(model.SectorId.parse(bits).index)
    else:
        sectors = list(range(2**params.M))
    spectrum = dict(raw.get("spectrum", {}))
    for i, v in enumerate(spectrum.get("variants", [])):
        if v == "diag" and params.has_cm:
            problems.append(f"$.spectrum.variants[{i}]: the diag variant has no c.m. mode")
        if v != "diag" and not params.has_cm:
            problems.append(f"$.spectrum.variants[{i}]: {v!r} needs model.Omega")
    if problems:
        raise ConfigError(problems)
    grids = {"J": [1.0], "gamma": [0.0], "theta": [0.0], "t": {"count": 10}, "h": [1e-2, 1e-3, 1e-4]}
    grids.update(raw.get("grids", {}))
    return CampaignConfig(
        raw=raw,
        params=params,
        spec=spec,
        tail_tolerance=float(t.get("tail_tolerance", 1e-6)),
        families=families,
        checks=tuple(raw.get("checks", CHECKS)),
        sectors=tuple(sectors),
        grids=grids,
        quadrature=dict(raw.get("quadrature", {})),
        spectrum=spectrum,
        moments=raw.get("moments"),
        output=dict(raw.get("output", {})),
    )


# --- jobs ---------------------------------------------------------------------------------


def _times(cfg: CampaignConfig) -> list[float]:
    t = cfg.grids["t"]
    if isinstance(t, list):
        return [float(x) for x in t]
    span = t.get("span", 2 * math.pi / min(cfg.params.omega))
    return [float(x) for x in np.linspace(0.0, span, t.get("count", 10))]


def _label_points(cfg: CampaignConfig, family: str) -> list[dict]:
    fs = vcs.family_spec(family)
    g = cfg.grids
    cm = fs.cm is not None
    thetas = g["theta"] if fs.degenerate else [0.0]
    jps = g.get("J_prime") if cm else [None]
    gps = g.get("gamma_prime", [0.0]) if cm else [None]
    out = []
    for J, gam, th, gp in itertools.product(g["J"], g["gamma"], thetas, gps):
        for Jp in (jps if jps is not None else [J]):
            out.append({"J": J, "gamma": gam, "theta": th, "J_prime": Jp, "gamma_prime": gp})
    return out


def _gk(cfg: CampaignConfig, family: str, point: dict, sector: int) -> vcs.GKParams:
    fs = vcs.family_spec(family)
    n = 1 if (fs.degenerate or fs.single_mode) else cfg.params.N
    return vcs.GKParams(
        (point["J"],) * n, (point["gamma"],) * n, point["theta"], point["J_prime"], point["gamma_prime"], sector
    )


def plan_jobs(cfg: CampaignConfig, parts: tuple[str, ...] = ("spectrum", "vcs", "resolution", "moments")) -> list[tuple]:
    jobs: list[tuple] = []
    if "spectrum" in parts:
        for v in cfg.spectrum.get("variants", []):
            if v in ("diag", "cm_diag"):
                jobs.extend(("spectrum", v, k) for k in cfg.sectors)
            else:
                jobs.append(("spectrum", v, None))
    gk_checks = tuple(c for c in cfg.checks if c != "resolution")
    if "vcs" in parts and gk_checks:
        for fam in cfg.families:
            for k in cfg.sectors:
                for i, _ in enumerate(_label_points(cfg, fam)):
                    jobs.append(("vcs", fam, k, i))
    if "resolution" in parts and "resolution" in cfg.checks:
        for fam in cfg.families:
            jobs.append(("resolution", fam, None))
    if "moments" in parts and cfg.moments is not None:
        jobs.append(("moments", None, None))
    return jobs


def run_job(raw: dict, job: tuple) -> list[dict]:
    """Pure function of (config, job): returns report records."""
    cfg = parse_config(raw)
    kind = job[0]
    if kind == "spectrum":
        return _spectrum_job(cfg, job[1], job[2])
    if kind == "vcs":
        return _vcs_job(cfg, *job[1:])
    if kind == "resolution":
        return _resolution_job(cfg, job[1])
    if kind == "moments":
        return _moments_job(cfg)
    raise ParameterError(f"unknown job {job!r}")


def _spectrum_spec(cfg: CampaignConfig) -> TruncationSpec:
    cuts = cfg.spectrum.get("cutoffs")
    if cuts is None:
        return cfg.spec
    cm = cfg.spectrum.get("cm_cutoff", cfg.spec.cm_cutoff)
    return TruncationSpec(tuple(cuts), cm if cfg.params.has_cm else None, cfg.params.M)


def spectrum_reports(cfg: CampaignConfig, variant: str, sector: int | None) -> list[verify.VerificationReport]:
    spec = _spectrum_spec(cfg)
    levels = cfg.spectrum.get("levels", 15)
    tol = cfg.spectrum.get("tolerance", 1e-6)
    params = cfg.params
    bundle = assembly.build(variant, params, spec)
    if variant in ("diag", "cm_diag"):
        sec = model.SectorId.from_index(sector, params.M)
        numeric = np.sort(bundle.sector(sec.index).eigenvalues())[: levels + 10]
        analytic = verify.analytic_levels(params, spec, variant, sec, levels)
        rows = [(_occ_label(variant, occ), e) for occ, e in analytic]
        return [verify.compare_spectra(rows, numeric, variant, sec.label, tol)]
    full = bundle.full
    herm = hermiticity_defect(full.matrix)
    out = [
        verify.VerificationReport("hermiticity", variant, "-", {"dim": full.dim}, herm, 1e-12, 0.0),
    ]
    numeric = assembly.numeric_spectrum(full, lowest=levels + 10).values
    forms = ("alpha", "eig") if variant == "extradiag" else ("alpha",)
    for form in forms:
        analytic = []
        for sec in model.all_sectors(params.M):
            for occ, e in verify.analytic_levels(params, spec, variant, sec, levels, form):
                analytic.append(((sec.label,) + tuple(occ), e))
        analytic = sorted(analytic, key=lambda r: r[1])[:levels]
        rows = [(f"[{lab[0]}]" + _occ_label(variant, lab[1:]), e) for lab, e in analytic]
        rep = verify.compare_spectra(rows, numeric, variant, "all", tol, report_only=True)
        out.append(replace(rep, family=f"form-{form}"))
    return out


def _occ_label(variant: str, occ) -> str:
    return "(" + ",".join(str(int(x)) for x in occ) + ")"


def _spectrum_job(cfg, variant, sector):
    reps = spectrum_reports(cfg, variant, sector)
    return [_record(r, table=[list(row) for row in r.table]) for r in reps]


def _record(rep: verify.VerificationReport, table=None) -> dict:
    rec = rep.record()
    if table:
        rec["table"] = [[_num(x) for x in row] for row in table]
    return rec


def _num(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _vcs_job(cfg: CampaignConfig, family: str, sector: int, point_index: int) -> list[dict]:
    point = _label_points(cfg, family)[point_index]
    gk = _gk(cfg, family, point, sector)
    params, spec = cfg.params, cfg.spec
    try:
        first = vcs.build_state(family, params, spec, gk, fixed=verify._fixed_template(family, params), max_tail=None)
        tail = first.tail
        if family in vcs.TWO_SECTOR:
            tail = verify._states(family, params, spec, gk).tail
        if tail > cfg.tail_tolerance:
            need = vcs.required_cutoff(max(gk.J + ((gk.J_prime,) if gk.J_prime is not None else ())), cfg.tail_tolerance / 4)
            raise vcs.TailBoundError(
                f"{family}: truncation tail {tail:.3g} exceeds {cfg.tail_tolerance:.3g}; cutoff >= {need} needed", need
            )
    except vcs.TailBoundError as exc:
        rep = verify.VerificationReport(
            "tail_bound", vcs.family_spec(family).variant, family, {"J": gk.J, "J_prime": gk.J_prime, "sector": sector},
            math.inf, cfg.tail_tolerance, math.inf, str(exc),
        )
        return [_record(rep)]
    reps = []
    times = _times(cfg)
    for check in cfg.checks:
        if check == "normalization":
            reps.append(verify.check_norm(family, params, spec, gk))
        elif check == "continuity":
            for direction in ("J", "gamma"):
                reps.append(verify.check_continuity(family, params, spec, gk, cfg.grids["h"], direction))
        elif check == "temporal_stability":
            reps.append(verify.check_temporal_stability(family, params, spec, gk, times, "family"))
            if vcs.family_spec(family).cm_sign > 0:
                lit = verify.check_temporal_stability(family, params, spec, gk, times, "uniform")
                reps.append(replace(lit, report_only=True, notes=lit.notes + "; literal +Omega t shift"))
        elif check == "negative_control":
            reps.append(verify.check_negative_control(family, params, spec, gk, times))
        elif check == "action_identity":
            reps.append(verify.check_action_identity(family, params, spec, gk))
    return [_record(r) for r in reps]


def _resolution_job(cfg: CampaignConfig, family: str) -> list[dict]:
    q = cfg.quadrature
    n_max = q.get("n_max", 8)
    params = cfg.params
    spec = TruncationSpec((n_max,) * params.N, n_max if params.has_cm else None, params.M)
    fs = vcs.family_spec(family)
    measure = q.get("degenerate_measure", "literal")
    w0 = -1.0 if (fs.degenerate and measure == "literal") else 0.0
    rule = verify.QuadratureRule.gauss_laguerre(q.get("Q", 40), q.get("K", 2 * n_max + 1), q.get("K_theta", 1), w0)
    out = []
    try:
        for k in cfg.sectors:
            gk = verify._template_gk(fs, params).replace(sector=k)
            if fs.degenerate and measure == "literal":
                main = verify.check_resolution(family, params, spec, rule, gk, "literal", exclude_degenerate_vacuum=True)
                out.append(replace(main.report, parameters={**main.report.parameters, "sector": k}))
                n0 = float(main.diagonal[0])
                full = verify.check_resolution(family, params, spec, rule, gk, "literal").report
                out.append(
                    replace(
                        full,
                        property="resolution_n0",
                        parameters={**full.parameters, "sector": k},
                        report_only=True,
                        notes=f"n = 0 labels get weight d(0) - 1 = 0 under the literal measure; first diagonal {n0}",
                    )
                )
            else:
                res = verify.check_resolution(family, params, spec, rule, gk, measure)
                out.append(replace(res.report, parameters={**res.report.parameters, "sector": k}))
    except verify.RuleTooCoarse as exc:
        out = [
            verify.VerificationReport(
                "resolution", fs.variant, family, {"Q": rule.Q, "K": rule.K, "required_Q": exc.required_Q,
                                                   "required_K": exc.required_K}, math.inf, 0.0, 0.0, str(exc)
            )
        ]
    return [_record(r) for r in out]


def moment_reports(Q: int, degenerate_N=(2,), degenerate_n_max: int = 15, n_max: int | None = None) -> list[verify.VerificationReport]:
    rule = verify.QuadratureRule.gauss_laguerre(Q, 1)
    top = 2 * Q - 1 if n_max is None else n_max
    out = [
        verify.check_moments(rule, verify.exp_measure_targets(top), name="exp"),
        verify.check_moments(rule, verify.exp_measure_targets(top), name="cm-exp"),
    ]
    for N in degenerate_N:
        out.extend(verify.degenerate_measure_reports(max(Q, degenerate_n_max + 1), N, degenerate_n_max))
    return out


def _moments_job(cfg: CampaignConfig) -> list[dict]:
    m = cfg.moments or {}
    reps = moment_reports(m.get("Q", 16), tuple(m.get("degenerate_N", [2])), m.get("degenerate_n_max", 15))
    return [_record(r) for r in reps]


# --- bundles ------------------------------------------------------------------------------


def _key(rec: dict) -> tuple:
    return (rec["property"], rec["variant"], rec["family"], hashlib.sha256(_canonical(rec["parameters"]).encode()).hexdigest())


def _timestamp() -> str:
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.datetime.fromtimestamp(epoch, datetime.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_bundle(cfg_digests: list[str], names: list[str], records: list[dict]) -> dict:
    records = sorted(records, key=lambda r: (_key(r), _canonical(r)))
    asserted = [r for r in records if not r["report_only"]]
    return {
        "metadata": {
            "config_hashes": sorted(cfg_digests),
            "names": sorted(names),
            "timestamp": _timestamp(),
            "version": __version__,
        },
        "reports": records,
        "summary": {
            "total": len(records),
            "asserted": len(asserted),
            "passed": sum(r["pass"] for r in asserted),
            "failed": sum(not r["pass"] for r in asserted),
            "report_only": len(records) - len(asserted),
        },
    }


def bundle_status(bundle: dict, strict: bool = False) -> int:
    for r in bundle["reports"]:
        if not r["pass"] and (strict or not r["report_only"]):
            return 1
    return 0


def dumps_ndjson(bundle: dict) -> str:
    lines = [json.dumps({"type": "metadata", **bundle["metadata"]}, sort_keys=True)]
    lines += [json.dumps({"type": "report", **r}, sort_keys=True) for r in bundle["reports"]]
    lines.append(json.dumps({"type": "summary", **bundle["summary"]}, sort_keys=True))
    return "\n".join(lines) + "\n"


def loads_ndjson(text: str) -> dict:
    meta, reports, summary = {}, [], None
    for line in text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        kind = rec.pop("type", "report")
        if kind == "metadata":
            meta = rec
        elif kind == "report":
            reports.append(rec)
        elif kind == "summary":
            summary = rec
    out = {"metadata": meta, "reports": reports}
    if summary is not None:
        out["summary"] = summary
    return out


def summary_table(bundle: dict) -> str:
    head = f"{'property':<22} {'variant':<10} {'family':<12} {'metric':>12} {'tolerance':>12} {'status':<11}"
    lines = [head, "-" * len(head)]
    for r in bundle["reports"]:
        metric = r["metric"] if isinstance(r["metric"], (int, float)) else float("inf")
        status = ("pass" if r["pass"] else "FAIL") + (" (report)" if r["report_only"] else "")
        lines.append(
            f"{r['property']:<22} {r['variant']:<10} {r['family']:<12} {metric:>12.3e} {r['tolerance']:>12.3e} {status:<11}"
        )
    s = bundle["summary"]
    lines.append(f"asserted {s['asserted']}  passed {s['passed']}  failed {s['failed']}  report-only {s['report_only']}")
    return "\n".join(lines) + "\n"


def spectrum_csv(bundle: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "form", "sector", "label", "analytic", "numeric", "abs_error"])
    for r in bundle["reports"]:
        if r["property"] != "spectrum":
            continue
        for sector, label, analytic, numeric, err in r.get("table", []):
            w.writerow([r["variant"], r["family"], sector, label, repr(analytic), repr(numeric), repr(err)])
    return buf.getvalue()


def write_bundle(bundle: dict, out: Path, fmt: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if fmt in ("ndjson", "both"):
        (out / "reports.ndjson").write_text(dumps_ndjson(bundle))
        (out / "summary.txt").write_text(summary_table(bundle))
    if fmt in ("csv", "both"):
        (out / "spectrum.csv").write_text(spectrum_csv(bundle))


def _sanitize(records: list[dict]) -> list[dict]:
    # Round-trip through JSON so in-memory bundles match files read back.
    return json.loads(json.dumps(records, default=_num))


def execute(cfg: CampaignConfig, parts=("spectrum", "vcs", "resolution", "moments"), parallel: int = 1) -> dict:
    jobs = plan_jobs(cfg, parts)
    log.info("%s: %d jobs on %d worker(s)", cfg.name, len(jobs), parallel)
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(run_job, itertools.repeat(cfg.raw), jobs))
    else:
        results = [run_job(cfg.raw, job) for job in jobs]
    records = [rec for res in results for rec in res]
    return make_bundle([cfg.digest], [cfg.name], _sanitize(records))


# --- entry point --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gkvcs", description="Boson-fermion Hamiltonians and their vector coherent states")
    p.add_argument("--version", action="version", version=f"gkvcs {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="config path or bundled name")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", choices=["ndjson", "csv", "both"], default=None)
        sp.add_argument("--parallel", type=int, default=1, help="worker processes")
        sp.add_argument("--strict", action="store_true", help="report-only discrepancies also fail")

    common(sub.add_parser("run", help="run every check of a campaign config"))
    sp = sub.add_parser("spectrum", help="analytic versus numeric spectra")
    common(sp)
    sp.add_argument("--variant", choices=list(assembly.VARIANTS))
    sp.add_argument("--sector", help="sector bit string, e.g. 11")
    sp.add_argument("--levels", type=int)
    sp = sub.add_parser("vcs-verify", help="Gazeau-Klauder checks for coherent-state families")
    common(sp)
    sp.add_argument("--family", action="append", choices=sorted(vcs.FAMILIES))
    sp = sub.add_parser("moments", help="moment problems of the measures")
    common(sp, config_required=False)
    sp.add_argument("--Q", type=int, default=16)
    sp.add_argument("--n-max", type=int, default=None)
    sp.add_argument("--degenerate-N", type=int, action="append")
    sp = sub.add_parser("report-merge", help="merge report bundles deterministically")
    sp.add_argument("bundles", nargs="+", help="reports.ndjson files or directories holding one")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--format", choices=["ndjson", "csv", "both"], default="ndjson")
    sp.add_argument("--strict", action="store_true")
    return p


def _setup_logging() -> None:
    level = os.environ.get("GKVCS_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _emit(bundle: dict, args, cfg: CampaignConfig | None) -> int:
    out = args.out or (cfg.output.get("dir") if cfg else None)
    fmt = args.format or (cfg.output.get("format") if cfg else None) or "both"
    if out:
        write_bundle(bundle, Path(out), fmt)
    sys.stdout.write(summary_table(bundle))
    return bundle_status(bundle, args.strict)


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    try:
        if args.command == "report-merge":
            return _merge(args)
        if args.command == "moments" and args.config is None:
            reps = moment_reports(args.Q, tuple(args.degenerate_N or [2]), 15, args.n_max)
            bundle = make_bundle([], ["moments"], _sanitize([_record(r) for r in reps]))
            return _emit(bundle, args, None)
        raw = load_raw(args.config)
        if args.command == "spectrum":
            raw = _spectrum_overrides(raw, args)
        if args.command == "vcs-verify" and args.family:
            raw = {**raw, "families": args.family}
        cfg = parse_config(raw)
        parts = {
            "run": ("spectrum", "vcs", "resolution", "moments"),
            "spectrum": ("spectrum",),
            "vcs-verify": ("vcs", "resolution"),
            "moments": ("moments",),
        }[args.command]
        if args.command == "moments" and cfg.moments is None:
            cfg = parse_config({**raw, "moments": {"Q": args.Q}})
        bundle = execute(cfg, parts, max(1, args.parallel))
        if args.command == "spectrum" and args.sector:
            _print_two_column(bundle)
        return _emit(bundle, args, cfg)
    except ConfigError as exc:
        for line in exc.problems:
            sys.stderr.write(f"config error: {line}\n")
        return 2
    except (ParameterError, ContractError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def _spectrum_overrides(raw: dict, args) -> dict:
    raw = copy.deepcopy(raw)
    spectrum = raw.setdefault("spectrum", {})
    if args.variant:
        spectrum["variants"] = [args.variant]
    if args.levels:
        spectrum["levels"] = args.levels
    if args.sector:
        raw["sectors"] = [args.sector]
    return raw


def _print_two_column(bundle: dict) -> None:
    sys.stdout.write(f"{'analytic':>22} {'numeric':>22}\n")
    for r in bundle["reports"]:
        for _, _, analytic, numeric, _ in r.get("table", []):
            sys.stdout.write(f"{analytic:>22.15g} {numeric:>22.15g}\n")


def _merge(args) -> int:
    records: dict[tuple, dict] = {}
    hashes, names = [], []
    for src in args.bundles:
        path = Path(src)
        if path.is_dir():
            path = path / "reports.ndjson"
        if not path.is_file():
            sys.stderr.write(f"error: no bundle at {src}\n")
            return 2
        try:
            b = loads_ndjson(path.read_text())
        except json.JSONDecodeError as exc:
            sys.stderr.write(f"error: {src}: {exc}\n")
            return 2
        hashes.extend(b["metadata"].get("config_hashes", []))
        names.extend(b["metadata"].get("names", []))
        for r in b["reports"]:
            records.setdefault((_key(r), _canonical(r)), r)
    bundle = make_bundle(sorted(set(hashes)), sorted(set(names)), list(records.values()))
    if args.out:
        write_bundle(bundle, Path(args.out), args.format)
    else:
        sys.stdout.write(dumps_ndjson(bundle))
    return bundle_status(bundle, args.strict)


if __name__ == "__main__":
    raise SystemExit(main())
