"""Run configuration: one canonical JSON document, validated in full.

Parsing collects every violation instead of stopping at the first, names
unknown keys, and applies the documented defaults.  A validated spec can then
build the actual domain / exponent fields / kernel / initial data / solver
config objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, first_eigenmode, grad_sq_norm, zero_boundary
from .kernels import ExponentialKernel, PowerLawKernel, SampledKernel, XiFunction, ZeroKernel
from .solver import SimConfig
from .varexp import ExponentField, exponent_profile, validate_exponent_bounds

__all__ = ["RunSpec", "SpecValidationError", "parse_spec", "apply_overrides", "DEFAULTS"]


DEFAULTS = {
    "exponents.q_max": 6.0,
    "time.output_stride": 1,
    "time.history_stride": 1,
    "solver.blowup_threshold": 1e6,
    "solver.memory_mode": "auto",
    "initial.u1": {"profile": "zero"},
    "analysis.envelope": "auto",
    "analysis.fit": True,
    "analysis.B_override": None,
    "analysis.sigma": None,
}

_TOP_KEYS = {"domain", "exponents", "kernel", "coefficients", "initial", "time", "solver", "analysis"}
_BLOCK_KEYS = {
    "domain": {"dim", "lengths", "nodes"},
    "exponents": {"m", "p", "q_max"},
    "kernel": {"kind", "g0", "k", "C", "alpha", "samples", "tail", "xi"},
    "coefficients": {"a", "b"},
    "initial": {"u0", "u1"},
    "time": {"dt", "t_end", "output_stride", "history_stride"},
    "solver": {"blowup_threshold", "memory_mode"},
    "analysis": {"envelope", "fit", "B_override", "sigma"},
}
_PROFILE_KEYS = {
    "const": {"profile", "value"},
    "linear": {"profile", "lo", "hi"},
    "sine-bump": {"profile", "base", "amplitude"},
    "array": {"profile", "values"},
    "sine-mode": {"profile", "amplitude", "mode"},
    "bump": {"profile", "amplitude", "center", "width"},
    "scaled-eigenmode": {"profile", "amplitude"},
    "zero": {"profile"},
}


class SpecValidationError(ValueError):
    """Carries the full list of violations found in a run spec."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid run spec:\n  " + "\n  ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class RunSpec:
    raw: dict

    # -- builders ---------------------------------------------------------

    def domain(self) -> DomainSpec:
        d = self.raw["domain"]
        return DomainSpec(dim=d["dim"], lengths=tuple(d["lengths"]), nodes=tuple(d["nodes"]))

    def exponent_field(self, which: str, dom: DomainSpec) -> ExponentField:
        prof = dict(self.raw["exponents"][which])
        name = prof.pop("profile")
        return exponent_profile(name, prof, dom)

    def kernel(self):
        k = self.raw["kernel"]
        kind = k["kind"]
        if kind == "exponential_xi":
            return ExponentialKernel(g0=k["g0"], k=k["k"])
        if kind == "power_law":
            return PowerLawKernel(g0=k["g0"], C=k["C"], alpha=k["alpha"])
        if kind == "zero":
            return ZeroKernel()
        samples = k["samples"]
        if isinstance(samples, str):
            data = np.loadtxt(samples, delimiter=",")
        else:
            data = np.asarray(samples, dtype=float)
        tail = k.get("tail")
        tail_tuple = None
        if tail is not None:
            if tail["kind"] == "exponential":
                tail_tuple = ("exponential", float(tail["rate"]))
            else:
                tail_tuple = ("power", float(tail["beta"]), float(tail["coef"]))
        xi = None
        if "xi" in k and k["xi"] is not None:
            xi = XiFunction.constant(float(k["xi"]))
        return SampledKernel(times=data[:, 0], values=data[:, 1], tail=tail_tuple, xi=xi)

    def sim_config(self) -> SimConfig:
        t = self.raw["time"]
        c = self.raw["coefficients"]
        s = self.raw["solver"]
        return SimConfig(
            a=c["a"],
            b=c["b"],
            dt=t["dt"],
            t_end=t["t_end"],
            blowup_threshold=s["blowup_threshold"],
            history_stride=t["history_stride"],
            output_stride=t["output_stride"],
            memory_mode=s["memory_mode"],
        )

    def initial_data(self, dom: DomainSpec) -> tuple[np.ndarray, np.ndarray]:
        u0 = build_initial(self.raw["initial"]["u0"], dom)
        u1 = build_initial(self.raw["initial"]["u1"], dom)
        return u0, u1

    @property
    def analysis_options(self) -> dict:
        return self.raw["analysis"]


def build_initial(prof: dict, dom: DomainSpec) -> np.ndarray:
    name = prof["profile"]
    if name == "zero":
        return np.zeros(dom.shape)
    amp = float(prof["amplitude"])
    if name == "sine-mode":
        mode = int(prof.get("mode", 1))
        axes = dom.axes()
        if dom.dim == 1:
            u = amp * np.sin(mode * np.pi * axes[0] / dom.lengths[0])
        else:
            x, y = dom.meshgrid()
            u = amp * (
                np.sin(mode * np.pi * x / dom.lengths[0])
                * np.sin(mode * np.pi * y / dom.lengths[1])
            )
    elif name == "bump":
        center = float(prof.get("center", 0.5))
        width = float(prof.get("width", 0.25))
        grids = dom.meshgrid() if dom.dim == 2 else [dom.axes()[0]]
        rho_sq = sum(
            ((g / L - center) / width) ** 2 for g, L in zip(grids, dom.lengths)
        )
        u = np.zeros(dom.shape)
        inside = rho_sq < 1.0
        u[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - rho_sq[inside]))
    elif name == "scaled-eigenmode":
        # amplitude prescribes the gradient norm of the ground mode
        mode = first_eigenmode(dom)
        u = amp * mode / math.sqrt(grad_sq_norm(mode, dom))
    else:
        raise ValueError(f"unknown initial profile '{name}'")
    return zero_boundary(u, dom)


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply dotted-path key=value overrides (values parsed as JSON, else raw)."""
    out = json.loads(json.dumps(doc))  # deep copy
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override '{item}' is not of the form path=value")
        path, _, raw_val = item.partition("=")
        try:
            value = json.loads(raw_val)
        except json.JSONDecodeError:
            value = raw_val
        keys = path.split(".")
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value
    return out


def _fill_defaults(doc: dict) -> dict:
    out = json.loads(json.dumps(doc))
    for dotted, value in DEFAULTS.items():
        block, _, key = dotted.partition(".")
        out.setdefault(block, {})
        if key not in out[block]:
            out[block][key] = json.loads(json.dumps(value)) if isinstance(value, dict) else value
    return out


def _check_profile(prof, where: str, bad: list[str]) -> None:
    if not isinstance(prof, dict) or "profile" not in prof:
        bad.append(f"{where}: expected an object with a 'profile' key")
        return
    name = prof["profile"]
    if name not in _PROFILE_KEYS:
        bad.append(f"{where}: unknown profile '{name}'")
        return
    for key in prof:
        if key not in _PROFILE_KEYS[name]:
            bad.append(f"{where}: unknown key '{key}' for profile '{name}'")
    required = _PROFILE_KEYS[name] - {"profile", "mode", "center", "width"}
    for key in required:
        if key not in prof:
            bad.append(f"{where}: profile '{name}' needs '{key}'")


def parse_spec(text: str) -> RunSpec:
    """Parse + validate a JSON run spec; raises SpecValidationError listing
    every violation found."""
    bad: list[str] = []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecValidationError([f"not valid JSON: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise SpecValidationError(["top level must be a JSON object"])

    for key in doc:
        if key not in _TOP_KEYS:
            bad.append(f"unknown top-level key '{key}'")
    for block in ("domain", "exponents", "kernel", "coefficients", "initial", "time"):
        if block not in doc:
            bad.append(f"missing required block '{block}'")
    if bad:
        raise SpecValidationError(bad)

    doc = _fill_defaults(doc)
    for block, allowed in _BLOCK_KEYS.items():
        for key in doc.get(block, {}):
            if key not in allowed:
                bad.append(f"{block}: unknown key '{key}'")

    dom = None
    d = doc["domain"]
    try:
        dom = DomainSpec(dim=d.get("dim", 0), lengths=tuple(d.get("lengths", ())),
                         nodes=tuple(d.get("nodes", ())))
    except (ValueError, TypeError) as exc:
        bad.append(f"domain: {exc}")

    for which in ("m", "p"):
        if which not in doc["exponents"]:
            bad.append(f"exponents: missing '{which}'")
        else:
            _check_profile(doc["exponents"][which], f"exponents.{which}", bad)
    q_max = doc["exponents"].get("q_max", 6.0)
    if not isinstance(q_max, (int, float)) or q_max < 2.0:
        bad.append(f"exponents: q_max must be a number >= 2, got {q_max!r}")

    spec = RunSpec(doc)
    if dom is not None and not bad:
        for which in ("m", "p"):
            try:
                fieldv = spec.exponent_field(which, dom)
            except (ValueError, KeyError) as exc:
                bad.append(f"exponents.{which}: {exc}")
                continue
            rep = validate_exponent_bounds(fieldv, q_max)
            if not rep.ok:
                bad.append(f"exponents.{which}: {rep.message}")

    k = doc["kernel"]
    kind = k.get("kind")
    alpha_kernel = None
    if kind not in ("exponential_xi", "power_law", "general_xi", "zero"):
        bad.append(f"kernel: unknown kind '{kind}'")
    else:
        try:
            kernel = spec.kernel()
            if isinstance(kernel, PowerLawKernel):
                alpha_kernel = kernel.alpha
        except (ValueError, KeyError, OSError) as exc:
            bad.append(f"kernel: {exc}")

    c = doc["coefficients"]
    for name in ("a", "b"):
        val = c.get(name)
        if not isinstance(val, (int, float)) or val < 0:
            bad.append(f"coefficients: '{name}' must be a nonnegative number")

    for which in ("u0", "u1"):
        if which not in doc["initial"]:
            bad.append(f"initial: missing '{which}'")
        else:
            _check_profile(doc["initial"][which], f"initial.{which}", bad)

    t = doc["time"]
    dt = t.get("dt")
    t_end = t.get("t_end")
    if not isinstance(dt, (int, float)) or dt <= 0:
        bad.append("time: dt must be a positive number")
    if not isinstance(t_end, (int, float)) or t_end <= 0:
        bad.append("time: t_end must be a positive number")
    for name in ("output_stride", "history_stride"):
        val = t.get(name)
        if not isinstance(val, int) or val < 1:
            bad.append(f"time: {name} must be a positive integer")
    if dom is not None and isinstance(dt, (int, float)) and dt > 0:
        cfl = 0.5 * min(dom.h) / math.sqrt(dom.dim)
        if dt > cfl * (1.0 + 1e-12):
            bad.append(
                f"time: dt = {dt:.6g} violates the CFL guard "
                f"dt <= 0.5*h/sqrt(dim) = {cfl:.6g} (h = {min(dom.h):.6g})"
            )
        if isinstance(t_end, (int, float)) and t_end > 0:
            n = t_end / dt
            if abs(n - round(n)) > 1e-9 * max(1.0, n):
                bad.append(f"time: t_end/dt = {n:.12g} is not an integer step count")
            elif isinstance(t.get("output_stride"), int) and t["output_stride"] >= 1:
                if int(round(n)) % t["output_stride"] != 0:
                    bad.append("time: output_stride must divide the step count")

    s = doc["solver"]
    if s.get("memory_mode") not in ("auto", "full", "recursion"):
        bad.append(f"solver: unknown memory_mode '{s.get('memory_mode')}'")
    if not isinstance(s.get("blowup_threshold"), (int, float)) or s["blowup_threshold"] <= 0:
        bad.append("solver: blowup_threshold must be positive")

    an = doc["analysis"]
    if an.get("envelope") not in ("auto", "type1", "type2", "none"):
        bad.append(f"analysis: unknown envelope request '{an.get('envelope')}'")
    sigma = an.get("sigma")
    if sigma is not None:
        if not isinstance(sigma, (int, float)) or not (0.0 < sigma < 1.0):
            bad.append("analysis: sigma must lie in (0, 1)")
        elif alpha_kernel is not None and 2.0 * alpha_kernel + sigma >= 3.0:
            bad.append(
                f"analysis: 2*alpha + sigma < 3 required, got "
                f"{2.0 * alpha_kernel + sigma:.6g}"
            )
    B_override = an.get("B_override")
    if B_override is not None and (not isinstance(B_override, (int, float)) or B_override <= 0):
        bad.append("analysis: B_override must be positive when given")

    if bad:
        raise SpecValidationError(bad)
    return spec
