"""Command-line entry point: ``tankersched validate|sample|solve|analyze|schedule``.

Instance arguments accept a JSON path or ``builtin:reference`` /
``builtin:tiny`` for the bundled instances. Every artifact of a run goes
under ``<out>/<run-name>``; the run name defaults to a UTC timestamp and
``config.json`` echoes the resolved configuration (no clock values) so
that a run can be repeated byte for byte.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analysis import (AnalysisReport, penalty_sensitivity, report_to_dict, run_pipeline,
                       write_report)
from .formulation import build_dt, build_ev, build_tsr
from .instance import Instance, InstanceError, load_instance, validate_instance
from .instances import reference_instance, tiny_instance
from .scenario import (ScenarioSet, SolveFailure, dump_scenarios, expand_travel_time,
                       load_scenarios, mean_scenario, sample_demand_scenarios, saa_convergence,
                       single)
from .schedule import (ExtractionError, extract_schedule, gantt_document, movements_to_csv,
                       replay_validate, source_consumer_map, timelines_to_csv)
from .solver import Solution, SolveConfig, load_solution, solve

log = logging.getLogger("tankersched")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NO_INCUMBENT = 2
EXIT_INTERNAL = 3

BUILTINS = {"builtin:reference": reference_instance, "builtin:tiny": tiny_instance}


@dataclass
class RunConfig:
    instance: str
    command: str
    seed: int = 0
    n: int = 50
    p_high: float = 0.5
    mode: str = "demand"
    gap_limit: float = 0.01
    time_limit_s: float = 36000.0
    backend: str = "highs"
    jobs: int = 1
    out: str = "runs"
    run_name: str | None = None
    extra: dict = field(default_factory=dict)

    def solve_config(self) -> SolveConfig:
        return SolveConfig(backend=self.backend, gap_limit=self.gap_limit,
                           time_limit_s=self.time_limit_s, jobs=self.jobs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("run_name")
        d.pop("out")
        return d


class _NoIncumbent(RuntimeError):
    pass


def _load(spec: str) -> Instance:
    if spec in BUILTINS:
        return BUILTINS[spec]()
    return load_instance(spec)


def _scenarios(inst: Instance, cfg: RunConfig, path: str | None = None) -> ScenarioSet:
    if path:
        return load_scenarios(path)
    scen = sample_demand_scenarios(inst, cfg.n, cfg.seed)
    if cfg.mode == "hybrid":
        scen = expand_travel_time(scen, cfg.p_high)
    return scen


def _run_dir(cfg: RunConfig) -> Path:
    name = cfg.run_name or datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    d = Path(cfg.out) / name
    d.mkdir(parents=True, exist_ok=True)
    doc = {"tankersched_version": __version__, **cfg.to_dict()}
    (d / "config.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return d


def _require(sol: Solution, what: str) -> Solution:
    if not sol.has_incumbent:
        raise _NoIncumbent(f"{what}: solver ended {sol.status} without an incumbent")
    return sol


def _config(args: argparse.Namespace) -> RunConfig:
    known = {f for f in RunConfig.__dataclass_fields__}
    kw = {k: v for k, v in vars(args).items() if k in known and v is not None}
    extra = {k: v for k, v in vars(args).items()
             if k not in known and k not in ("func", "log_level") and v is not None}
    return RunConfig(extra=extra, **kw)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_validate(cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    rep = validate_instance(inst)
    if cfg.extra.get("format") == "json":
        print(json.dumps({"ok": rep.ok,
                          "errors": [asdict(v) for v in rep.errors],
                          "warnings": [asdict(v) for v in rep.warnings]}, indent=1))
    else:
        for v in rep.errors:
            print(f"error   {v.path}: {v.message}")
        for v in rep.warnings:
            print(f"warning {v.path}: {v.message}")
        print(f"{inst.name}: {len(rep.errors)} error(s), {len(rep.warnings)} warning(s)")
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_sample(cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    scen = _scenarios(inst, cfg)
    out = cfg.extra.get("output")
    if out:
        dump_scenarios(scen, out)
        print(f"wrote {len(scen)} scenarios to {out}")
    else:
        d = _run_dir(cfg)
        dump_scenarios(scen, d / "scenarios.json")
        print(f"wrote {len(scen)} scenarios to {d / 'scenarios.json'}")
    return EXIT_OK


def _write_schedule(inst, model, sol, scen, d: Path, k: int | None, fmt: str) -> None:
    sched = extract_schedule(inst, model, sol, scen, k)
    (d / "movements.csv").write_text(movements_to_csv(sched.movements))
    (d / "tf_timeline.csv").write_text(timelines_to_csv(sched))
    (d / "gantt.json").write_text(json.dumps(gantt_document(sched), indent=1) + "\n")
    rep = replay_validate(inst, scen, sched.k, sched.movements, sched)
    (d / "replay.json").write_text(json.dumps(
        {"scenario": sched.k, "violations": [asdict(v) for v in rep.violations]}, indent=1) + "\n")
    if not rep.ok:
        log.warning("replay found %d violation(s) in scenario %d", len(rep), sched.k)


def cmd_solve(cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    variant = cfg.extra.get("variant", "tsr")
    scfg = cfg.solve_config()
    d = _run_dir(cfg)
    if variant == "dt":
        scen = mean_scenario(inst) if not cfg.extra.get("scenarios") else \
            single(_scenarios(inst, cfg, cfg.extra["scenarios"]), cfg.extra.get("k") or 0)
        model = build_dt(inst, scen)
    else:
        scen = _scenarios(inst, cfg, cfg.extra.get("scenarios"))
        if variant == "tsr":
            model = build_tsr(inst, scen)
        else:
            fs = cfg.extra.get("first_stage")
            anchor = load_solution(fs) if fs else \
                _require(solve(build_dt(inst, mean_scenario(inst)), scfg), "dt on mean demand")
            model = build_ev(inst, scen, anchor)
    sol = solve(model, scfg)
    sol.dump(d / "solution.json")
    dump_scenarios(scen, d / "scenarios.json")
    summary = {"variant": variant, "status": sol.status, "objective": sol.objective,
               "gap": sol.gap, "scenarios": len(scen)}
    if sol.has_incumbent:
        from .analysis import cost_components, extra_tankers, source_contribution
        summary["cost_components"] = cost_components(model, sol)
        summary["source_shares"] = source_contribution(sol)
        summary["extra_tankers"] = [{"region": r, "vehicle": v, "count": n}
                                    for (r, v), n in extra_tankers(inst, sol).items()]
        summary["source_consumer_map"] = [
            {"consumer": c, "product": p, "sources": [{"source": s, "volume": vol} for s, vol in srcs]}
            for (c, p), srcs in source_consumer_map(sol).items()]
        _write_schedule(inst, model, sol, scen, d, cfg.extra.get("k"), cfg.extra.get("format"))
    (d / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(json.dumps({k: summary[k] for k in ("variant", "status", "objective", "gap")}))
    print(f"artifacts in {d}")
    _require(sol, variant)
    return EXIT_OK


def _parse_grid(text: str | None) -> list[tuple[float, float]]:
    if not text:
        return []
    out = []
    for item in text.split(","):
        a, b = item.split(":")
        out.append((float(a), float(b)))
    return out


def cmd_analyze(cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    scfg = cfg.solve_config()
    d = _run_dir(cfg)
    scen = _scenarios(inst, cfg, cfg.extra.get("scenarios"))
    rep: AnalysisReport = run_pipeline(inst, scen, scfg)
    grid = _parse_grid(cfg.extra.get("sensitivity"))
    if grid:
        rep.sensitivity = penalty_sensitivity(inst, scen, grid, scfg,
                                              product=cfg.extra.get("product") or "DPW")
    if cfg.extra.get("compare_hybrid") and cfg.mode == "demand":
        hybrid = expand_travel_time(scen, cfg.p_high)
        rep.comparison["hybrid"] = run_pipeline(inst, hybrid, scfg)
    if cfg.extra.get("saa_max"):
        trace = saa_convergence(inst, cfg.extra.get("saa_start") or 5, cfg.extra.get("saa_step") or 5,
                                cfg.extra["saa_max"], cfg.extra.get("band") or 0.001, cfg.seed,
                                scfg, hybrid=cfg.mode == "hybrid", p_high=cfg.p_high)
        rep.saa = trace.points
        rep.saa_n_star = trace.n_star
        rep.saa_stabilized = trace.stabilized
    write_report(rep, d)
    head = report_to_dict(rep)
    print(json.dumps({k: head[k] for k in ("dt_obj", "ev_obj", "tsr_obj", "vss_pct", "evpi_pct")}))
    print(f"report in {d}")
    return EXIT_OK


def cmd_schedule(cfg: RunConfig) -> int:
    inst = _load(cfg.instance)
    run = Path(cfg.extra["run"])
    sol = load_solution(run / "solution.json")
    scen = load_scenarios(run / "scenarios.json")
    variant = json.loads((run / "summary.json").read_text())["variant"]
    if variant == "dt":
        model = build_dt(inst, scen)
    elif variant == "tsr":
        model = build_tsr(inst, scen)
    else:
        model = build_ev(inst, scen, {n: sol.assignment[n] for n in sol.assignment})
    sched = extract_schedule(inst, model, sol, scen, cfg.extra.get("k"))
    moves = sched.day(cfg.extra["day"]) if cfg.extra.get("day") else sched.movements
    if cfg.extra.get("format") == "json":
        doc = gantt_document(sched)
        if cfg.extra.get("day"):
            lo, hi = 24 * (cfg.extra["day"] - 1) + 1, 24 * cfg.extra["day"]
            doc["lanes"] = {k: [b for b in v if lo <= b["start"] <= hi] for k, v in doc["lanes"].items()}
        print(json.dumps(doc, indent=1))
    else:
        sys.stdout.write(movements_to_csv(moves))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "sample": cmd_sample, "solve": cmd_solve,
            "analyze": cmd_analyze, "schedule": cmd_schedule}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tankersched", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solving: bool = False, sampling: bool = False):
        sp.add_argument("instance", help="instance JSON path or builtin:reference / builtin:tiny")
        sp.add_argument("--format", choices=("text", "json", "csv"), default=None)
        if sampling:
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("-n", "--n", type=int, default=50, help="demand samples N")
            sp.add_argument("--mode", choices=("demand", "hybrid"), default="demand")
            sp.add_argument("--p-high", dest="p_high", type=float, default=0.5)
            sp.add_argument("--out", default="runs")
            sp.add_argument("--run-name", dest="run_name")
        if solving:
            sp.add_argument("--scenarios", help="scenario file instead of sampling")
            sp.add_argument("--gap", dest="gap_limit", type=float, default=0.01)
            sp.add_argument("--time-limit", dest="time_limit_s", type=float, default=36000.0)
            sp.add_argument("--backend", choices=("highs", "bnb"), default="highs")
            sp.add_argument("--jobs", type=int, default=1)

    common(sub.add_parser("validate", help="check an instance"))
    s = sub.add_parser("sample", help="draw a scenario set")
    common(s, sampling=True)
    s.add_argument("-o", "--output", help="write here instead of a run directory")
    s = sub.add_parser("solve", help="solve the DT, EV or TSR model")
    common(s, solving=True, sampling=True)
    s.add_argument("--variant", choices=("dt", "ev", "tsr"), default="tsr")
    s.add_argument("--first-stage", dest="first_stage", help="solution file whose first stage EV fixes")
    s.add_argument("--k", type=int, help="scenario for dt and schedule exports")
    s = sub.add_parser("analyze", help="full DT/EV/TSR comparison report")
    common(s, solving=True, sampling=True)
    s.add_argument("--sensitivity", help="penalty pairs surplus:shortfall,...")
    s.add_argument("--product", default="DPW", help="product the sensitivity grid applies to")
    s.add_argument("--compare-hybrid", dest="compare_hybrid", action="store_true")
    s.add_argument("--saa-start", dest="saa_start", type=int)
    s.add_argument("--saa-step", dest="saa_step", type=int)
    s.add_argument("--saa-max", dest="saa_max", type=int)
    s.add_argument("--band", type=float)
    s = sub.add_parser("schedule", help="print movements from a solve run directory")
    common(s)
    s.add_argument("--run", required=True, help="run directory written by 'solve'")
    s.add_argument("--k", type=int)
    s.add_argument("--day", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = _config(args)
    try:
        return COMMANDS[args.command](cfg)
    except InstanceError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (_NoIncumbent, SolveFailure) as exc:
        print(f"no incumbent: {exc}", file=sys.stderr)
        return EXIT_NO_INCUMBENT
    except ExtractionError as exc:
        print(f"schedule extraction failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
