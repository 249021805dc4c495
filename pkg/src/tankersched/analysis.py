"""Comparative metrics over the DT, EV and TSR models.

Everything here is a pure function of solved models: objective values,
VSS/EVPI percentages, cost decomposition, fulfillment statistics, source
shares, extra tanker counts and the penalty sensitivity sweep. Figure
analogues are written as flat CSV tables next to a JSON report.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .formulation import COST_COMPONENTS, build_dt, build_ev, build_tsr, parse_name
from .instance import Instance, Penalty
from .milp import MilpModel
from .scenario import ScenarioSet, SolveFailure, mean_scenario, single
from .solver import Solution, SolveConfig, solve

REPORT_SCHEMA_VERSION = 1


class DomainError(ValueError):
    pass


def compute_vss(tsr_obj: float, ev_obj: float) -> float:
    """Value of the stochastic solution, in percent of EV (negative when TSR is cheaper)."""
    if not ev_obj > 0:
        raise DomainError(f"EV objective must be positive, got {ev_obj}")
    return 100.0 * (tsr_obj - ev_obj) / ev_obj


def compute_evpi(tsr_obj: float, dt_expected_obj: float) -> float:
    """Expected value of perfect information, in percent of TSR."""
    if not tsr_obj > 0:
        raise DomainError(f"TSR objective must be positive, got {tsr_obj}")
    return 100.0 * (tsr_obj - dt_expected_obj) / tsr_obj


def _checked(sol: Solution, stage: str, k: int | None = None) -> Solution:
    if not sol.has_incumbent:
        where = f" scenario {k}" if k is not None else ""
        raise SolveFailure(f"{stage}{where} ended {sol.status}", k=k, stage=stage)
    return sol


def _map(fn, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def wait_and_see_solutions(inst: Instance, scen: ScenarioSet,
                           solve_cfg: SolveConfig | None = None) -> list[Solution]:
    """One perfect-information solve per scenario, in scenario order."""
    if len(scen) == 0:
        raise ValueError("scenario set is empty")
    cfg = solve_cfg or SolveConfig()

    def one(k: int) -> Solution:
        return _checked(solve(build_dt(inst, single(scen, k)), cfg), "dt", k)

    return _map(one, list(range(len(scen))), cfg.jobs)


def wait_and_see(inst: Instance, scen: ScenarioSet, solve_cfg: SolveConfig | None = None) -> float:
    """Probability-weighted perfect-information objective."""
    sols = wait_and_see_solutions(inst, scen, solve_cfg)
    return float(sum(s.probability * sol.objective for s, sol in zip(scen, sols)))


# ---------------------------------------------------------------------------
# Solution summaries
# ---------------------------------------------------------------------------


def cost_components(model: MilpModel, sol: Solution) -> dict[str, float]:
    """Objective split by component; sums to the solver objective."""
    x = model.assignment_vector(sol.assignment)
    comp = model.component_values(x)
    out = {name: float(comp.get(name, 0.0)) for name in COST_COMPONENTS}
    if model.obj_constant:
        out["constant"] = float(model.obj_constant)
    return out


def _by_family(assignment: Mapping[str, float], family: str):
    for name, val in assignment.items():
        fam, idx = parse_name(name)
        if fam == family:
            yield idx, val


def source_contribution(sol: Solution) -> dict[str, float | None]:
    """Share of the total planned delivery volume coming from each source.

    With nothing delivered every source present in the plan maps to None.
    """
    vol: dict[str, float] = {}
    for idx, val in _by_family(sol.assignment, "xDeCon"):
        vol[idx[0]] = vol.get(idx[0], 0.0) + max(val, 0.0)
    total = sum(vol.values())
    if total <= 0:
        return {s: None for s in sorted(vol)}
    return {s: vol[s] / total for s in sorted(vol)}


def extra_tankers(inst: Instance, sol: Solution) -> dict[tuple[str, str], float]:
    """Extra tankers hired per (region, vehicle type), in tanker units."""
    out: dict[tuple[str, str], float] = {}
    for (r, v, p), val in _by_family(sol.assignment, "xVExQ"):
        key = (r, v)
        out[key] = out.get(key, 0.0) + val / inst.vehicles[v].capacity_kl
    return {k: round(out[k], 9) for k in sorted(out)}


@dataclass(frozen=True)
class Quartiles:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    expected: float
    fully_met: float  # probability mass of scenarios meeting all demand

    @classmethod
    def of(cls, values: Sequence[float], weights: Sequence[float], tol: float = 1e-9) -> "Quartiles":
        v = np.asarray(values, dtype=float)
        w = np.asarray(weights, dtype=float)
        q = np.percentile(v, [0, 25, 50, 75, 100])
        return cls(*(float(x) for x in q), expected=float(np.dot(w, v) / w.sum()),
                   fully_met=float(w[v >= 1.0 - tol].sum() / w.sum()))


def _day_label(t: int, nt: int) -> str:
    day = (t - 1) // 24 + 1
    if nt % 24 and day == nt // 24 + 1:
        return f"{day}-partial"
    return str(day)


def fulfillment_stats(inst: Instance, scen: ScenarioSet, sol: Solution,
                      ) -> dict[tuple[str, str, str], Quartiles]:
    """Fraction of demand met per (region, day, product) across scenarios.

    Shortfall is read from the ``dDemM`` recourse columns; cells with no
    demand in a group are skipped.
    """
    short: dict[tuple[str, str, int, int], float] = {}
    for (c, p, t, k), val in _by_family(sol.assignment, "dDemM"):
        short[(c, p, int(t), int(k))] = max(val, 0.0)
    nt = inst.horizon_nt
    dem: dict[tuple[str, str, str], np.ndarray] = {}
    miss: dict[tuple[str, str, str], np.ndarray] = {}
    n = len(scen)
    for k, s in enumerate(scen):
        for (c, p), arr in sorted(s.demand.items()):
            region = inst.consumers[c].region
            for t in range(1, nt + 1):
                d = float(arr[t - 1])
                if d <= 0:
                    continue
                key = (region, _day_label(t, nt), p)
                if key not in dem:
                    dem[key] = np.zeros(n)
                    miss[key] = np.zeros(n)
                dem[key][k] += d
                miss[key][k] += short.get((c, p, t, k), 0.0)
    probs = scen.probabilities
    out = {}
    for key in sorted(dem):
        frac = np.where(dem[key] > 0, 1.0 - miss[key] / np.maximum(dem[key], 1e-300), 1.0)
        out[key] = Quartiles.of(np.clip(frac, 0.0, 1.0), probs)
    return out


def _deviation_arrays(sol: Solution, n: int, product: str | None):
    """Per-scenario lists of (surplus, shortfall) values over demand cells."""
    plus: dict[tuple, float] = {}
    minus: dict[tuple, float] = {}
    for (c, p, t, k), val in _by_family(sol.assignment, "dDemP"):
        if product is None or p == product:
            plus[(c, p, t, k)] = val
    for (c, p, t, k), val in _by_family(sol.assignment, "dDemM"):
        if product is None or p == product:
            minus[(c, p, t, k)] = val
    per_k_plus = [[] for _ in range(n)]
    per_k_minus = [[] for _ in range(n)]
    for key in sorted(set(plus) | set(minus)):
        k = int(key[3])
        per_k_plus[k].append(plus.get(key, 0.0))
        per_k_minus[k].append(minus.get(key, 0.0))
    return per_k_plus, per_k_minus


def deviation_fractions(sol: Solution, scen: ScenarioSet, product: str | None = None,
                        tol: float = 1e-6) -> dict[str, float]:
    """Shortfall/surplus frequencies measured three ways.

    ``scenario_*``: probability mass of scenarios with any cell above ``tol``.
    ``cell_*``: share of (cell, scenario) pairs above ``tol``, probability weighted.
    ``net_*``: probability mass of scenarios whose total shortfall exceeds
    total surplus (or the reverse).
    """
    n = len(scen)
    probs = scen.probabilities
    pk, mk = _deviation_arrays(sol, n, product)
    out = {"scenario_shortfall": 0.0, "scenario_surplus": 0.0, "cell_shortfall": 0.0,
           "cell_surplus": 0.0, "net_shortfall": 0.0, "net_surplus": 0.0}
    for k in range(n):
        plus = np.asarray(pk[k])
        minus = np.asarray(mk[k])
        w = probs[k]
        if plus.size == 0:
            continue
        out["scenario_shortfall"] += w * bool(np.any(minus > tol))
        out["scenario_surplus"] += w * bool(np.any(plus > tol))
        out["cell_shortfall"] += w * float(np.mean(minus > tol))
        out["cell_surplus"] += w * float(np.mean(plus > tol))
        net = float(minus.sum() - plus.sum())
        out["net_shortfall"] += w * (net > tol)
        out["net_surplus"] += w * (net < -tol)
    return {key: 100.0 * val for key, val in out.items()}


def max_complementarity(sol: Solution) -> float:
    """Largest product dDemP * dDemM over all demand cells."""
    plus = dict(_by_family(sol.assignment, "dDemP"))
    worst = 0.0
    for idx, m in _by_family(sol.assignment, "dDemM"):
        worst = max(worst, plus.get(idx, 0.0) * m)
    return worst


# ---------------------------------------------------------------------------
# Penalty sensitivity
# ---------------------------------------------------------------------------


@dataclass
class SensitivityRow:
    surplus: float
    shortfall: float
    product: str
    status: str
    objective: float | None = None
    gap: float | None = None
    # shares of (cell, scenario) cases; each case is short, surplus or exact
    pct_shortfall: float | None = None
    pct_surplus: float | None = None
    # scenarios with at least one short (surplus) cell; these overlap
    any_shortfall: float | None = None
    any_surplus: float | None = None
    net_shortfall: float | None = None
    net_surplus: float | None = None
    error: str | None = None


def penalty_sensitivity(inst: Instance, scen: ScenarioSet, grid: Iterable[tuple[float, float]],
                        solve_cfg: SolveConfig | None = None, product: str = "DPW",
                        tol: float = 1e-6) -> list[SensitivityRow]:
    """Re-solve the stochastic model for each (surplus, shortfall) penalty pair on ``product``."""
    grid = [(float(a), float(b)) for a, b in grid]
    if not grid:
        raise ValueError("penalty grid is empty")
    cfg = solve_cfg or SolveConfig()

    def one(pair: tuple[float, float]) -> SensitivityRow:
        q_plus, q_minus = pair
        row = SensitivityRow(q_plus, q_minus, product, status="ERROR")
        try:
            sol = solve(build_tsr(inst.with_penalties({product: Penalty(q_plus, q_minus)}), scen), cfg)
        except Exception as exc:  # recorded, sweep continues
            row.error = f"{type(exc).__name__}: {exc}"
            return row
        row.status = sol.status
        if not sol.has_incumbent:
            row.error = f"no incumbent ({sol.status})"
            return row
        fr = deviation_fractions(sol, scen, product, tol)
        row.objective = sol.objective
        row.gap = sol.gap
        row.pct_shortfall = fr["cell_shortfall"]
        row.pct_surplus = fr["cell_surplus"]
        row.any_shortfall = fr["scenario_shortfall"]
        row.any_surplus = fr["scenario_surplus"]
        row.net_shortfall = fr["net_shortfall"]
        row.net_surplus = fr["net_surplus"]
        return row

    return _map(one, grid, cfg.jobs)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


@dataclass
class ModelResult:
    variant: str
    status: str
    objective: float | None
    gap: float | None
    cost_components: dict[str, float] = field(default_factory=dict)
    source_shares: dict[str, float | None] = field(default_factory=dict)
    extra_tankers: dict[tuple[str, str], float] = field(default_factory=dict)


@dataclass
class AnalysisReport:
    mode: str
    n_scenarios: int
    dt_obj: float | None  # probability-weighted perfect-information objective
    ev_obj: float | None
    tsr_obj: float | None
    mean_dt_obj: float | None  # DT on the mean scenario, the EV anchor
    vss_pct: float | None
    evpi_pct: float | None
    cost_components: dict[str, float]
    fulfillment: dict[tuple[str, str, str], Quartiles]
    source_shares: dict[str, float | None]
    extra_tankers: dict[tuple[str, str], float]
    models: dict[str, ModelResult] = field(default_factory=dict)
    gaps: dict[str, float | None] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    sensitivity: list[SensitivityRow] = field(default_factory=list)
    saa: list[tuple[int, float]] = field(default_factory=list)
    saa_n_star: int | None = None
    saa_stabilized: bool | None = None
    comparison: dict[str, "AnalysisReport"] = field(default_factory=dict)

    def ordering_ok(self, scale: float | None = None) -> bool:
        """wait-and-see <= TSR <= EV, each within twice the combined gaps."""
        if None in (self.dt_obj, self.tsr_obj):
            return False
        scale = scale or max(abs(self.tsr_obj), 1.0)
        g = {k: (v or 0.0) for k, v in self.gaps.items()}
        slack_ws = 2 * (g.get("dt", 0.0) + g.get("tsr", 0.0)) * scale + 1e-6 * scale
        ok = self.dt_obj <= self.tsr_obj + slack_ws
        if self.ev_obj is not None:
            slack_ev = 2 * (g.get("tsr", 0.0) + g.get("ev", 0.0)) * scale + 1e-6 * scale
            ok = ok and self.tsr_obj <= self.ev_obj + slack_ev
        return ok


def _model_result(variant: str, inst: Instance, model: MilpModel, sol: Solution) -> ModelResult:
    if not sol.has_incumbent:
        return ModelResult(variant, sol.status, None, None)
    return ModelResult(variant, sol.status, sol.objective, sol.gap, cost_components(model, sol),
                       source_contribution(sol), extra_tankers(inst, sol))


def run_pipeline(inst: Instance, scen: ScenarioSet, solve_cfg: SolveConfig | None = None,
                 return_solutions: bool = False):
    """DT on the mean scenario, EV from its first stage, TSR, and wait-and-see.

    With ``return_solutions`` the solved models are returned alongside the
    report as ``(report, {variant: (model, solution)})``.
    """
    cfg = solve_cfg or SolveConfig()
    mode = "hybrid" if scen.kind.value == "HYBRID" else "demand"
    notes: list[str] = []

    dt_model = build_dt(inst, mean_scenario(inst))
    dt_sol = _checked(solve(dt_model, cfg), "dt-mean")

    tsr_model = build_tsr(inst, scen)
    tsr_sol = _checked(solve(tsr_model, cfg), "tsr")

    ev_model = build_ev(inst, scen, dt_sol)
    ev_sol = solve(ev_model, cfg)
    if not ev_sol.has_incumbent:
        notes.append(f"EV recourse problem ended {ev_sol.status}; the mean-demand plan "
                     "cannot be completed in some scenario")

    ws = wait_and_see_solutions(inst, scen, cfg)
    ws_obj = float(sum(s.probability * sol.objective for s, sol in zip(scen, ws)))
    ws_gap = max((sol.gap or 0.0) for sol in ws)

    ev_obj = ev_sol.objective if ev_sol.has_incumbent else None
    vss = compute_vss(tsr_sol.objective, ev_obj) if ev_obj is not None else None
    evpi = compute_evpi(tsr_sol.objective, ws_obj)

    models = {
        "dt": _model_result("dt", inst, dt_model, dt_sol),
        "ev": _model_result("ev", inst, ev_model, ev_sol),
        "tsr": _model_result("tsr", inst, tsr_model, tsr_sol),
    }
    report = AnalysisReport(
        mode=mode,
        n_scenarios=len(scen),
        dt_obj=ws_obj,
        ev_obj=ev_obj,
        tsr_obj=tsr_sol.objective,
        mean_dt_obj=dt_sol.objective,
        vss_pct=vss,
        evpi_pct=evpi,
        cost_components=models["tsr"].cost_components,
        fulfillment=fulfillment_stats(inst, scen, tsr_sol),
        source_shares=models["tsr"].source_shares,
        extra_tankers=models["tsr"].extra_tankers,
        models=models,
        gaps={"dt": ws_gap, "dt_mean": dt_sol.gap, "ev": ev_sol.gap, "tsr": tsr_sol.gap},
        notes=notes,
    )
    if return_solutions:
        return report, {"dt": (dt_model, dt_sol), "ev": (ev_model, ev_sol),
                        "tsr": (tsr_model, tsr_sol)}
    return report


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def _r(x, nd: int = 6):
    """Round for reporting; keeps output stable against last-bit noise."""
    if x is None:
        return None
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return round(float(x), nd)


def _pct(x):
    return None if x is None else round(float(x), 1)


def report_to_dict(rep: AnalysisReport) -> dict:
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "mode": rep.mode,
        "n_scenarios": rep.n_scenarios,
        "dt_obj": _r(rep.dt_obj),
        "ev_obj": _r(rep.ev_obj),
        "tsr_obj": _r(rep.tsr_obj),
        "mean_dt_obj": _r(rep.mean_dt_obj),
        "vss_pct": _pct(rep.vss_pct),
        "evpi_pct": _pct(rep.evpi_pct),
        "gaps": {k: _r(v, 9) for k, v in sorted(rep.gaps.items())},
        "cost_components": {k: _r(v) for k, v in rep.cost_components.items()},
        "fulfillment": [{"region": r, "day": d, "product": p,
                         **{k: _r(v) for k, v in asdict(q).items()}}
                        for (r, d, p), q in sorted(rep.fulfillment.items())],
        "source_shares": {k: _r(v) for k, v in sorted(rep.source_shares.items())},
        "extra_tankers": [{"region": r, "vehicle": v, "count": _r(n)}
                          for (r, v), n in sorted(rep.extra_tankers.items())],
        "models": {name: {"status": m.status, "objective": _r(m.objective), "gap": _r(m.gap, 9),
                          "cost_components": {k: _r(v) for k, v in m.cost_components.items()},
                          "source_shares": {k: _r(v) for k, v in sorted(m.source_shares.items())},
                          "extra_tankers": [{"region": r, "vehicle": v, "count": _r(n)}
                                            for (r, v), n in sorted(m.extra_tankers.items())]}
                   for name, m in sorted(rep.models.items())},
        "notes": list(rep.notes),
    }
    if rep.saa:
        doc["saa"] = {"points": [{"n": n, "objective": _r(o)} for n, o in rep.saa],
                      "n_star": rep.saa_n_star, "stabilized": rep.saa_stabilized}
    if rep.sensitivity:
        doc["sensitivity"] = [{k: (_r(v) if isinstance(v, float) else v)
                               for k, v in asdict(row).items()} for row in rep.sensitivity]
    if rep.comparison:
        doc["comparison"] = {k: report_to_dict(v) for k, v in sorted(rep.comparison.items())}
    return doc


def _csv(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: ("" if row.get(c) is None else row.get(c)) for c in columns})
    return buf.getvalue()


def figure_tables(rep: AnalysisReport) -> dict[str, str]:
    """CSV text per figure analogue, keyed by file stem."""
    reports = {rep.mode: rep, **{k: v for k, v in rep.comparison.items() if k != rep.mode}}
    tables = {}

    tables["fig3"] = _csv(
        [{k: (_r(v) if isinstance(v, float) else v) for k, v in asdict(row).items()}
         for row in rep.sensitivity],
        ["product", "surplus", "shortfall", "status", "objective", "gap", "pct_shortfall",
         "pct_surplus", "any_shortfall", "any_surplus", "net_shortfall", "net_surplus", "error"])

    rows = []
    for mode, r in sorted(reports.items()):
        for name in ("dt", "ev", "tsr"):
            m = r.models.get(name)
            if m is None:
                continue
            for comp in COST_COMPONENTS:
                rows.append({"mode": mode, "model": name, "component": comp,
                             "value": _r(m.cost_components.get(comp))})
    tables["fig5"] = _csv(rows, ["mode", "model", "component", "value"])

    rows = []
    for (region, day, p), q in sorted(rep.fulfillment.items()):
        rows.append({"region": region, "day": day, "product": p,
                     **{k: _r(v) for k, v in asdict(q).items()}})
    tables["fig6"] = _csv(rows, ["region", "day", "product", "min", "q1", "median", "q3",
                                 "max", "expected", "fully_met"])

    rows = []
    for mode, r in sorted(reports.items()):
        for name, m in sorted(r.models.items()):
            for (region, v), n in sorted(m.extra_tankers.items()):
                rows.append({"mode": mode, "model": name, "region": region, "vehicle": v,
                             "count": _r(n)})
    tables["fig9"] = _csv(rows, ["mode", "model", "region", "vehicle", "count"])

    rows = []
    for mode, r in sorted(reports.items()):
        for s, share in sorted(r.source_shares.items()):
            rows.append({"mode": mode, "source": s, "share": _r(share)})
    tables["fig10"] = _csv(rows, ["mode", "source", "share"])

    rows = []
    for mode, r in sorted(reports.items()):
        for name in ("dt", "ev", "tsr"):
            m = r.models.get(name)
            if m is None:
                continue
            rows.append({"mode": mode, "model": name, "status": m.status,
                         "objective": _r(m.objective),
                         **{c: _r(m.cost_components.get(c)) for c in COST_COMPONENTS}})
    tables["fig11"] = _csv(rows, ["mode", "model", "status", "objective", *COST_COMPONENTS])
    return tables


def write_report(rep: AnalysisReport, outdir: str | Path) -> list[Path]:
    """Write ``report.json`` plus one CSV per figure analogue; returns the paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json"]
    paths[0].write_text(json.dumps(report_to_dict(rep), indent=1, sort_keys=True) + "\n")
    for stem, text in figure_tables(rep).items():
        p = out / f"{stem}.csv"
        p.write_text(text)
        paths.append(p)
    if rep.saa:
        p = out / "saa_trace.csv"
        p.write_text(_csv([{"n": n, "objective": _r(o)} for n, o in rep.saa], ["n", "objective"]))
        paths.append(p)
    return paths
