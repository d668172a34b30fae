"""Run orchestration: gate -> subsolution -> continuation -> diagnostics -> export.

The pipeline is pure with respect to the filesystem: it returns artifacts as
named text blobs; callers (service, CLI) decide where they land.  Exit codes
are part of the contract:

    0  success
    2  configuration error
    3  compatibility gate failed (psi outside (0, K0])
    4  continuation failed
    5  solve succeeded but a diagnostic threshold failed
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, exports, graphgeom, psidsl, solver, sphere, subsolution
from .config import RunConfig

__all__ = ["RunResult", "CheckResult", "run", "check",
           "EXIT_OK", "EXIT_CONFIG", "EXIT_SERRIN", "EXIT_CONTINUATION", "EXIT_DIAGNOSTICS"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SERRIN = 3
EXIT_CONTINUATION = 4
EXIT_DIAGNOSTICS = 5

log = logging.getLogger("weingarten")


@dataclass
class RunResult:
    status: str
    exit_code: int
    messages: list = field(default_factory=list)
    history: list = field(default_factory=list)
    report: str | None = None
    artifacts: dict = field(default_factory=dict)   # name -> text


@dataclass
class CheckResult:
    status: str
    exit_code: int
    k0: float
    psi_min: float
    psi_max: float
    serrin_passed: bool
    serrin_message: str
    subsolution_admissible: bool
    kappa_min: float
    kappa_max: float
    messages: list = field(default_factory=list)


def _setup(cfg: RunConfig):
    psi = psidsl.parse(cfg.psi)
    grid = sphere.build_grid(cfg.cap_radius, cfg.rings, cfg.sectors)
    sph = subsolution.EnclosingSphere(tuple(cfg.center), cfg.radius)
    return psi, grid, sph


def _settings(cfg: RunConfig) -> solver.StepSettings:
    return solver.StepSettings(
        newton_tol=cfg.newton_tol, max_newton=cfg.max_newton,
        step_initial=cfg.step_initial, step_min=cfg.step_min,
        step_shrink=cfg.step_shrink, step_grow=cfg.step_grow,
        comparison_tol=cfg.comparison_tol, jacobian_mode=cfg.jacobian_mode,
    )


def check(cfg: RunConfig) -> CheckResult:
    """Compatibility gate plus subsolution construction, no continuation."""
    psi, grid, sph = _setup(cfg)
    gate = subsolution.serrin_check(psi, sph, cfg.k)
    if not gate.passed:
        return CheckResult(status="serrin_violation", exit_code=EXIT_SERRIN,
                           k0=gate.k0, psi_min=gate.psi_min, psi_max=gate.psi_max,
                           serrin_passed=False, serrin_message=gate.message,
                           subsolution_admissible=False,
                           kappa_min=float("nan"), kappa_max=float("nan"),
                           messages=[gate.message])
    sub, _phi = subsolution.build_subsolution(sph, grid)
    ok, _rep = graphgeom.admissible(sub)
    kap = sub.geometry.kappa
    return CheckResult(status="ok", exit_code=EXIT_OK, k0=gate.k0,
                       psi_min=gate.psi_min, psi_max=gate.psi_max,
                       serrin_passed=True, serrin_message=gate.message,
                       subsolution_admissible=ok,
                       kappa_min=float(np.min(kap)), kappa_max=float(np.max(kap)),
                       messages=["gate passed; subsolution admissible" if ok
                                 else "gate passed; subsolution NOT admissible"])


def run(cfg: RunConfig) -> RunResult:
    """Full solve; always returns a RunResult (failures carry partial artifacts)."""
    psi, grid, sph = _setup(cfg)

    if psi.has_nonsmooth and not cfg.allow_nonsmooth_psi:
        return RunResult(status="config_error", exit_code=EXIT_CONFIG,
                         messages=["psi uses abs/min/max, which have no continuous "
                                   "derivative; set allow_nonsmooth_psi to override"])

    gate = subsolution.serrin_check(psi, sph, cfg.k)
    if not gate.passed:
        log.info("gate failed: %s", gate.message)
        text = (f"serrin gate: FAIL\nk0 = {gate.k0!r}\npsi_min = {gate.psi_min!r}\n"
                f"psi_max = {gate.psi_max!r}\nreason = {gate.message}\n")
        return RunResult(status="serrin_violation", exit_code=EXIT_SERRIN,
                         messages=[gate.message], artifacts={"report.txt": text},
                         report=text)

    problem = solver.CapProblem.build(grid, sph, cfg.k, psi)
    artifacts = {"subsolution.json": exports.field_json(problem.sub_state, "subsolution")}

    try:
        state, history = solver.continuity_run(problem, _settings(cfg))
    except solver.ContinuationError as err:
        log.info("continuation failed: %s", err)
        artifacts["history.json"] = exports.history_json(err.history)
        return RunResult(status="continuation_failure", exit_code=EXIT_CONTINUATION,
                         messages=[str(err)], history=err.history, artifacts=artifacts)

    thresholds = diagnostics.DiagnosticThresholds(
        mesh_median_tol=cfg.mesh_median_tol, mesh_p95_tol=cfg.mesh_p95_tol,
        duality_tol=cfg.duality_tol, nm_margin_tol=cfg.nm_margin_tol)
    report = diagnostics.run_diagnostics(state, psi, cfg.k, vbar=problem.vbar,
                                         thresholds=thresholds)
    report_txt = diagnostics.report_text(report)

    artifacts["solution.json"] = exports.field_json(state, "solution")
    artifacts["history.json"] = exports.history_json(history)
    artifacts["report.txt"] = report_txt
    mesh = graphgeom.embed(state)
    wk, psi_vals = exports.solution_arrays(state, psi, cfg.k)
    if cfg.export_obj:
        artifacts["mesh.obj"] = exports.mesh_obj(mesh)
    if cfg.export_vtk:
        artifacts["mesh.vtk"] = exports.mesh_vtk(mesh, wk, psi_vals)

    if not report.ok:
        failed = sorted(name for name, ok in report.passes.items() if not ok)
        return RunResult(status="diagnostics_failure", exit_code=EXIT_DIAGNOSTICS,
                         messages=[f"diagnostic thresholds failed: {', '.join(failed)}"],
                         history=history, report=report_txt, artifacts=artifacts)

    return RunResult(status="ok", exit_code=EXIT_OK,
                     messages=["solve completed"], history=history,
                     report=report_txt, artifacts=artifacts)
