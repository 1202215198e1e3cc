"""Command-line front door: check / simulate / verify / fit / sweep.

Every command reads one JSON run spec, writes JSON reports (schema
"viscodecay/1") and CSV trajectories with floats printed at 17 significant
digits, and returns exit status 0 for success or an expected science outcome,
2 for "conditions unmet" / failed verification, 1 for errors.  Identical
specs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import analysis
from .domain import embedding_constant, first_eigenvalue, grad_sq_norm
from .energy import energy_identity_residual
from .kernels import ExponentialKernel, PowerLawKernel, SampledKernel, XiFunction, ZeroKernel
from .runspec import RunSpec, SpecValidationError, apply_overrides, parse_spec
from .solver import run
from .varexp import ExponentField

SCHEMA = "viscodecay/1"


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _render_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  "{k}": {_render_json(obj[k], indent + 1)}' for k in sorted(obj)
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(f"{pad}  {_render_json(v, indent + 1)}" for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)}")


def write_json(obj: dict, path: Path) -> None:
    path.write_text(_render_json(obj) + "\n")


def write_trajectory_csv(traj, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "E", "scriptE", "kinetic", "elastic", "memory",
             "source_modular", "lambda_t", "dissipation"]
        )
        for rec, lam in zip(traj.records, traj.lambda_t):
            writer.writerow(
                format(v, ".17g")
                for v in (rec.t, rec.E, rec.scriptE, rec.kinetic, rec.elastic,
                          rec.memory, rec.source_modular, lam, rec.dissipation)
            )


# ---------------------------------------------------------------------------
# shared pipeline pieces


class _Pipeline:
    """Everything derivable from a validated spec before time stepping."""

    def __init__(self, spec: RunSpec):
        self.spec = spec
        self.dom = spec.domain()
        self.m = spec.exponent_field("m", self.dom)
        self.p = spec.exponent_field("p", self.dom)
        self.kernel = spec.kernel()
        self.cfg = spec.sim_config()
        self.u0, self.u1 = spec.initial_data(self.dom)
        opts = spec.analysis_options
        B_override = opts.get("B_override")
        self.B = max(
            embedding_constant(self.dom, self.p, override=B_override),
            embedding_constant(self.dom, self.m, override=B_override),
        )
        self.l = self.kernel.l
        self.omega1 = first_eigenvalue(self.dom)
        self.lambda0 = math.sqrt(max(self.l, 0.0)) * math.sqrt(grad_sq_norm(self.u0, self.dom))
        self.E0 = self._initial_energy()
        self.constants = analysis.derive_constants(
            B=self.B, l=self.l, b=self.cfg.b, p1=self.p.q1, p2=self.p.q2,
            lambda0=self.lambda0, omega1=self.omega1, E0=self.E0,
        ) if self.l > 0 else None

    def _initial_energy(self) -> float:
        from .domain import l2_norm_sq, node_weights

        kin = 0.5 * l2_norm_sq(self.u1, self.dom)
        ela = 0.5 * grad_sq_norm(self.u0, self.dom)
        w = node_weights(self.dom)
        src = self.cfg.b * float(((np.abs(self.u0) ** self.p.values / self.p.values) * w).sum())
        return kin + ela - src

    def envelope_kind(self) -> str:
        req = self.spec.analysis_options.get("envelope", "auto")
        if req == "none":
            return "none"
        if req == "auto":
            family = "type2" if isinstance(self.kernel, PowerLawKernel) else "type1"
        else:
            family = req
        shape = "exp" if self.m.q2 <= 2.0 + 1e-12 else "poly"
        return f"{family}_{shape}"

    def xi(self) -> XiFunction | None:
        if isinstance(self.kernel, ExponentialKernel):
            return self.kernel.xi
        if isinstance(self.kernel, SampledKernel) and self.kernel.xi is not None:
            return self.kernel.xi
        if isinstance(self.kernel, PowerLawKernel):
            return XiFunction.constant(1.0)  # type-2 analysis always runs at unit rate
        return None

    def sigma_default(self) -> float | None:
        if not isinstance(self.kernel, PowerLawKernel):
            return None
        sigma = self.spec.analysis_options.get("sigma")
        if sigma is not None:
            return float(sigma)
        return 0.5 * (3.0 - 2.0 * self.kernel.alpha)

    def k_result(self) -> analysis.KResult:
        c = self.constants
        if c is None or c.omega_small is None:
            return analysis.KResult(ok=False, reason="stable-set constants unavailable")
        gamma = 0.5 * (self.m.q2 - 2.0)
        if isinstance(self.kernel, PowerLawKernel):
            sigma = self.sigma_default()
            return analysis.compute_K_alpha_sigma(
                c, self.m.q1, self.m.q2, self.cfg.a, self.dom.measure,
                self.kernel.alpha, sigma, self.kernel.C, gamma,
            )
        xi = self.xi()
        if xi is None:
            return analysis.KResult(ok=False, reason="kernel provides no rate function xi")
        return analysis.compute_K(
            c, self.m.q1, self.m.q2, self.cfg.a, self.dom.measure, xi.xi0, gamma
        )


def _constants_dict(pipe: _Pipeline) -> dict:
    c = pipe.constants
    out = {
        "B": pipe.B,
        "l": pipe.l,
        "omega1": pipe.omega1,
        "lambda0": pipe.lambda0,
        "E0": pipe.E0,
    }
    if c is not None:
        out.update(
            {
                "B1": c.B1,
                "lambda1": c.lambda1,
                "E1": c.E1,
                "lambda2": c.lambda2,
                "Ctilde": c.Ctilde,
                "omega": c.omega_small,
            }
        )
    return out


def _k_dict(kres: analysis.KResult) -> dict:
    if not kres.ok:
        return {"available": False, "reason": kres.reason}
    return {
        "available": True,
        "K": kres.K,
        "eps": kres.eps,
        "vareps": kres.vareps,
        "delta": kres.delta,
    }


# ---------------------------------------------------------------------------
# commands


def command_check(spec: RunSpec, out: Path) -> int:
    pipe = _Pipeline(spec)
    if pipe.constants is None:
        report = {
            "schema": SCHEMA,
            "constants": _constants_dict(pipe),
            "decay_conditions": {"ok": False, "conditions": []},
            "blowup_conditions": {"ok": False, "conditions": []},
            "K": {"available": False, "reason": "kernel mass >= 1 (l <= 0)"},
        }
        write_json(report, out / "check_report.json")
        return 2
    decay = analysis.check_decay_conditions(pipe.E0, pipe.constants, kernel=pipe.kernel)
    blowup = analysis.check_blowup_conditions(pipe.E0, pipe.constants, pipe.kernel, pipe.m.q2)
    kres = pipe.k_result()
    report = {
        "schema": SCHEMA,
        "constants": _constants_dict(pipe),
        "decay_conditions": decay.as_dict(),
        "blowup_conditions": blowup.as_dict(),
        "K": _k_dict(kres),
        "envelope_kind": pipe.envelope_kind(),
    }
    write_json(report, out / "check_report.json")
    return 0 if decay.ok else 2


def command_simulate(spec: RunSpec, out: Path) -> int:
    pipe = _Pipeline(spec)
    traj = run(pipe.cfg, pipe.kernel, pipe.m, pipe.p, pipe.dom, pipe.u0, pipe.u1)
    write_trajectory_csv(traj, out / "trajectory.csv")
    E = traj.energies
    increments = np.diff(E) if E.size > 1 else np.array([0.0])
    residual = energy_identity_residual(traj) if traj.outcome == "completed" else None
    summary = {
        "schema": SCHEMA,
        "outcome": traj.outcome,
        "blowup_time": traj.blowup_time,
        "final_t": float(traj.times[-1]),
        "final_E": float(E[-1]),
        "max_energy_increase": float(max(increments.max(), 0.0)),
        "max_identity_residual": residual.max_abs if residual is not None else None,
        "records": int(len(traj.records)),
    }
    write_json(summary, out / "simulate_summary.json")
    return 0


def command_verify(spec: RunSpec, out: Path) -> int:
    pipe = _Pipeline(spec)
    status = command_check(spec, out)
    verdict: dict = {"schema": SCHEMA}
    if status != 0:
        verdict.update(
            {
                "verified": False,
                "short_circuit": "decay conditions unmet",
                "constants": _constants_dict(pipe),
            }
        )
        write_json(verdict, out / "verify_report.json")
        return 2

    kres = pipe.k_result()
    kind = pipe.envelope_kind()
    if not kres.ok or kind == "none":
        verdict.update(
            {
                "verified": False,
                "short_circuit": kres.reason or "no envelope requested",
            }
        )
        write_json(verdict, out / "verify_report.json")
        return 2

    traj = run(pipe.cfg, pipe.kernel, pipe.m, pipe.p, pipe.dom, pipe.u0, pipe.u1)
    write_trajectory_csv(traj, out / "trajectory.csv")
    if traj.outcome != "completed":
        verdict.update(
            {
                "verified": False,
                "outcome": traj.outcome,
                "blowup_time": traj.blowup_time,
            }
        )
        write_json(verdict, out / "verify_report.json")
        return 2

    env = analysis.build_envelope(
        kind, kres.K, pipe.E0, pipe.m.q2, xi=pipe.xi(),
        alpha=getattr(pipe.kernel, "alpha", None), sigma=pipe.sigma_default(),
    )
    env_verdict = analysis.verify_envelope(traj, env)
    inv = analysis.check_invariant_set(traj, pipe.constants.lambda2, pipe.l)
    fit = None
    if spec.analysis_options.get("fit", True):
        fit = analysis.fit_decay(traj)
    verdict.update(
        {
            "verified": bool(env_verdict.ok),
            "outcome": traj.outcome,
            "envelope": {
                "kind": kind,
                "K": kres.K,
                "ok": env_verdict.ok,
                "tol": env_verdict.tol,
                "max_violation": env_verdict.max_violation,
                "min_margin": float(env_verdict.margins.min()),
            },
            "invariant_set": {
                "ok": inv.ok,
                "worst_t": inv.worst_t,
                "worst_excess": inv.worst_excess,
                "tol": inv.tol,
            },
            "fit": None
            if fit is None
            else {"kind": fit.kind, "rate": fit.rate, "r2": fit.r2, "note": fit.note},
        }
    )
    write_json(verdict, out / "verify_report.json")
    return 0 if env_verdict.ok else 2


def command_fit(csv_path: Path, out: Path) -> int:
    rows = np.genfromtxt(csv_path, delimiter=",", names=True)
    fit = analysis.fit_decay_series(np.atleast_1d(rows["t"]), np.atleast_1d(rows["E"]))
    write_json(
        {
            "schema": SCHEMA,
            "fit": {"kind": fit.kind, "rate": fit.rate, "r2": fit.r2,
                    "r2_alt": fit.r2_alt, "note": fit.note},
        },
        out / "fit_report.json",
    )
    return 0


def _sweep_worker(args) -> dict:
    idx, doc, command, out_dir = args
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        spec = parse_spec(json.dumps(doc))
        status = {"check": command_check, "simulate": command_simulate, "verify": command_verify}[
            command
        ](spec, out)
    except SpecValidationError as exc:
        (out / "error.txt").write_text("\n".join(exc.violations) + "\n")
        status = 1
    except Exception as exc:  # noqa: BLE001 - worker must not kill the pool
        (out / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        status = 1
    return {"index": idx, "dir": str(out_dir), "status": status}


def command_sweep(spec_doc: dict, sweep_doc: dict, out: Path, workers: int) -> int:
    grid = sweep_doc.get("grid", {})
    command = sweep_doc.get("command", "check")
    if command not in ("check", "simulate", "verify"):
        raise SpecValidationError([f"sweep: unknown command '{command}'"])
    paths = sorted(grid)
    combos = list(itertools.product(*(grid[p] for p in paths)))
    jobs = []
    for i, combo in enumerate(combos):
        overrides = [f"{p}={json.dumps(v)}" for p, v in zip(paths, combo)]
        doc = apply_overrides(spec_doc, overrides)
        jobs.append((i, doc, command, str(out / f"run_{i:04d}")))
    if workers > 1:
        with Pool(workers) as pool:
            results = pool.map(_sweep_worker, jobs)
    else:
        results = [_sweep_worker(j) for j in jobs]
    index = {
        "schema": SCHEMA,
        "command": command,
        "parameters": paths,
        "runs": [
            {"dir": r["dir"], "status": r["status"],
             "values": {p: v for p, v in zip(paths, combos[r["index"]])}}
            for r in sorted(results, key=lambda r: r["index"])
        ],
    }
    write_json(index, out / "sweep_index.json")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _load_spec(args) -> RunSpec:
    text = Path(args.spec).read_text()
    if args.override:
        doc = apply_overrides(json.loads(text), args.override)
        text = json.dumps(doc)
    return parse_spec(text)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="viscodecay",
        description="Simulate a viscoelastic wave equation with variable-exponent "
        "damping/source and verify decay envelopes and blow-up conditions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("check", "simulate", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, help="path to the JSON run spec")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--override", action="append", default=[],
                       help="dotted-path spec override, e.g. time.dt=0.001")
    p = sub.add_parser("fit")
    p.add_argument("--csv", required=True, help="trajectory CSV to fit")
    p.add_argument("--out", default=".", help="output directory")
    p = sub.add_parser("sweep")
    p.add_argument("--spec", required=True)
    p.add_argument("--sweep", required=True, help="JSON file: {grid: {path: [values]}, command}")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--workers", type=int, default=1)

    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "fit":
            return command_fit(Path(args.csv), out)
        if args.command == "sweep":
            spec_doc = json.loads(Path(args.spec).read_text())
            sweep_doc = json.loads(Path(args.sweep).read_text())
            return command_sweep(spec_doc, sweep_doc, out, args.workers)
        spec = _load_spec(args)
        handler = {"check": command_check, "simulate": command_simulate,
                   "verify": command_verify}[args.command]
        return handler(spec, out)
    except SpecValidationError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
