"""Scenario runner: ``peakonlab run <config>`` and ``peakonlab check``."""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import DomainError, ParameterError, PeakonLabError
from .evolution import (
    IvpSpec,
    evolve_full,
    growth_rate_fit,
    limit_integral_diagnostic,
    reformulate_tilde,
    truncated_norm_series,
)
from .export import lines_svg, write_csv, write_json
from .grid import build_grid, l2_norm
from .kernels import QForm, apply_Q, convolution_identity_residuals, dphi, hs_norm_squared, phi, stationary_residual
from .operator import OperatorKind, adjoint_identity_residuals, adjoint_null_vector, apply_operator
from .report import Check, RunReport
from .spectrum import LambdaRect, pseudospectral_scan

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "run_scenario", "main", "RunReport", "Check", "OUT_ENV"]

OUT_ENV = "PEAKONLAB_OUT"
SCENARIOS = ("identities", "spectrum-scan", "ivp-growth", "full-evolution", "appendix-null")
FORMATS = ("csv", "json", "svg")
INITIAL = ("bump", "gaussian", "plateau", "phi", "l0_mode")


class ConfigError(ParameterError):
    """Malformed or out-of-range configuration."""


@dataclass
class ScenarioConfig:
    """Validated scenario parameters.  ``None`` means "scenario default"."""

    scenario: str
    b: list = field(default_factory=lambda: [2.0])
    R: float = 40.0
    n_half: int | None = None
    gamma: float = 3.0
    kind: str = "L"
    re_min: float = 0.0
    re_max: float = 2.0
    im_min: float = -1.0
    im_max: float = 1.0
    n_re: int = 41
    n_im: int = 21
    lambda0: float | None = None
    T: float | None = None
    dt: float | None = None
    system: str = "eigp4"
    initial: str | None = None
    center: float | None = None
    width: float | None = None
    output_dir: str | None = None
    formats: list = field(default_factory=lambda: ["csv", "json"])
    threads: int = 1

    def grid_n_half(self) -> int:
        if self.n_half is not None:
            return self.n_half
        return 500 if self.scenario == "spectrum-scan" else 2000

    def rect(self) -> LambdaRect:
        return LambdaRect(self.re_min, self.re_max, self.im_min, self.im_max, self.n_re, self.n_im)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _float(text):
    val = float(text)
    if not math.isfinite(val):
        raise ValueError("not finite")
    return val


def _int(text):
    val = float(text)
    if val != int(val):
        raise ValueError("not an integer")
    return int(val)


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _list(item):
    def parse(text):
        vals = [item(p.strip()) for p in text.split(",") if p.strip()]
        if not vals:
            raise ValueError("empty list")
        return vals

    return parse


_KEYS = {
    "scenario": _choice(SCENARIOS),
    "b": _list(_float),
    "R": _float,
    "n_half": _int,
    "gamma": _float,
    "kind": _choice(tuple(k.value for k in OperatorKind)),
    "re_min": _float,
    "re_max": _float,
    "im_min": _float,
    "im_max": _float,
    "n_re": _int,
    "n_im": _int,
    "lambda0": _float,
    "T": _float,
    "dt": _float,
    "system": _choice(("eigp2", "eigp3", "eigp4")),
    "initial": _choice(INITIAL),
    "center": _float,
    "width": _float,
    "output_dir": str,
    "formats": _list(_choice(FORMATS)),
    "threads": _int,
}

# (predicate, precondition text) per key
_RANGES = {
    "R": (lambda v: v > 0, "R > 0"),
    "n_half": (lambda v: v >= 8, "n_half >= 8 (minimum grid size)"),
    "gamma": (lambda v: v >= 1, "gamma >= 1"),
    "n_re": (lambda v: v >= 1, "n_re >= 1"),
    "n_im": (lambda v: v >= 1, "n_im >= 1"),
    "T": (lambda v: v > 0, "T > 0"),
    "dt": (lambda v: v > 0, "dt > 0"),
    "width": (lambda v: v > 0, "width > 0"),
    "threads": (lambda v: v >= 1, "threads >= 1"),
}


def parse_config(text: str) -> ScenarioConfig:
    """Parse line-oriented ``key = value`` text; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, val = (p.strip() for p in line.partition("="))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not val:
            raise ConfigError(f"line {lineno}: missing value for {key!r}")
        try:
            parsed = _KEYS[key](val)
        except ValueError as exc:
            if key == "scenario":
                raise ConfigError(f"line {lineno}: unknown scenario {val!r}; choose from {', '.join(SCENARIOS)}") from exc
            raise ConfigError(f"line {lineno}: bad value {val!r} for {key!r}: {exc}") from exc
        if key in _RANGES:
            ok, pre = _RANGES[key]
            if not ok(parsed):
                raise ConfigError(f"line {lineno}: {key} = {val} is out of range: requires {pre}")
        values[key] = parsed
    if "scenario" not in values:
        raise ConfigError("missing required key 'scenario'")
    cfg = ScenarioConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    """Cross-field checks, done before anything runs or is written."""
    if cfg.scenario == "spectrum-scan":
        try:
            cfg.rect()
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
    if cfg.lambda0 is not None and cfg.scenario == "ivp-growth":
        bad = [b for b in cfg.b if not (b < 2.5 and 0 < cfg.lambda0 < 2.5 - b)]
        if bad and len(bad) == len(cfg.b):
            raise ConfigError(f"lambda0 = {cfg.lambda0} needs some b < 5/2 with 0 < lambda0 < 5/2 - b")
    if cfg.scenario == "full-evolution":
        grid = build_grid(cfg.R, cfg.grid_n_half(), cfg.gamma)
        if cfg.dt is not None and cfg.dt > 0.5 * grid.effective_spacing():
            raise ConfigError(f"dt = {cfg.dt} violates dt <= 0.5 h_eff = {0.5 * grid.effective_spacing():.6g}")


def _tag(b: float) -> str:
    return f"b{b:g}".replace(".", "p").replace("-", "m")


class _Writer:
    def __init__(self, cfg: ScenarioConfig, report: RunReport):
        self.dir = Path(cfg.output_dir) if cfg.output_dir else None
        self.formats = cfg.formats
        self.report = report

    def emit(self, stem: str, obj) -> None:
        if self.dir is None:
            return
        for fmt_ in self.formats:
            method = "to_dict" if fmt_ == "json" else f"to_{fmt_}"
            if not hasattr(obj, method):
                continue
            path = self.dir / f"{stem}.{fmt_}"
            if fmt_ == "json":
                write_json(path, obj.to_dict())
            else:
                getattr(obj, method)(path)
            self.report.artifacts.append(path.name)


def _identities(cfg, grid, report, writer):
    report.add(
        Check("K1 squared Hilbert-Schmidt norm", hs_norm_squared("K1", grid), 1.0, 1e-4),
        Check("K2 squared Hilbert-Schmidt norm", hs_norm_squared("K2", grid), 0.5, 1e-4),
    )
    rng = np.random.default_rng(7)
    ph, dp = phi(grid), dphi(grid)
    tests = [grid.sample(lambda x, c=c, w=w: np.exp(-(((x - c) / w) ** 2))) for c, w in rng.uniform([-5, 0.4], [5, 2], size=(5, 2))]
    report.add(Check("convolution identity 1 residual", max(convolution_identity_residuals(f, 1) for f in tests), 0.0, 1e-6, "<="))
    report.add(Check("convolution identity 2 residual", max(convolution_identity_residuals(f, 2) for f in tests), 0.0, 1e-6, "<="))
    for b in cfg.b:
        report.add(
            Check(f"b={b:g}: ||L phi - (2-b) phi'||", l2_norm(apply_operator("L", ph, b) - (2 - b) * dp), 0.0, 1e-5, "<="),
            Check(f"b={b:g}: ||L phi'||", l2_norm(apply_operator("L", dp, b)), 0.0, 1e-5, "<="),
            Check(f"b={b:g}: stationary residual sup norm", float(np.max(np.abs(stationary_residual(b, grid).values))), 0.0, 1e-6, "<="),
        )
        worst = 0.0
        for f in tests:
            qs = [apply_Q(f, b, form) for form in QForm]
            scale = max(l2_norm(q) for q in qs)
            worst = max(worst, max(l2_norm(p - q) for p in qs for q in qs) / scale)
        report.add(Check(f"b={b:g}: Q-form agreement (relative)", worst, 0.0, 1e-7, "<="))
        for name, r in zip(("1", "sgn", "phi^2", "phi phi'"), adjoint_identity_residuals(b, grid)):
            report.add(Check(f"b={b:g}: adjoint identity for {name}", r, 0.0, 1e-5, "<="))


def _spectrum(cfg, grid, report, writer):
    rect = cfg.rect()
    for b in cfg.b:
        scan = pseudospectral_scan(cfg.kind, b, grid, rect, threads=cfg.threads)
        writer.emit(f"scan_{_tag(b)}", scan)
        report.add(Check(f"b={b:g}: points needing the dense fallback", len(scan.failures), 0.0, 0.0, "<="))
        half = abs(2.5 - b)
        real_row = int(np.argmin(np.abs(rect.im_values)))
        i = int(np.argmax(rect.re_values))
        lam = float(rect.re_values[i])
        if abs(rect.im_values[real_row]) < 1e-12 and lam > half:
            report.add(
                Check(
                    f"b={b:g}: sigma_min({lam:g}) against the resolvent bound Re lambda - |5/2 - b|",
                    float(scan.sigma_min[real_row, i]),
                    lam - half,
                    0.2,
                    ">=",
                    note="tolerance is the discretization slack",
                )
            )
        inside = np.abs(rect.re_values) < half
        report.metrics[f"b={b:g}"] = {
            "strip_half_width": half,
            "min_sigma_inside_strip": float(scan.sigma_min[:, inside].min()) if inside.any() else None,
            "min_sigma_outside_strip": float(scan.sigma_min[:, ~inside].min()) if (~inside).any() else None,
        }


def _ivp(cfg, grid, report, writer):
    T = cfg.T or 6.0
    times = np.linspace(0.0, T, int(round(T / 0.1)) + 1)
    window = (T / 3, T)
    for b in cfg.b:
        initial = cfg.initial or "plateau"
        if initial == "phi":
            raise ConfigError("initial = phi is only available for full-evolution")
        params = {}
        if initial == "l0_mode":
            params = {"lambda0": cfg.lambda0 if cfg.lambda0 is not None else 0.25}
        elif initial == "plateau":
            params = {"left": 0.0, "right": 2.0}
        else:
            params = {k: v for k, v in (("center", cfg.center), ("width", cfg.width)) if v is not None}
        spec = IvpSpec(b, initial, T=T, params=params, grid=grid)
        series = truncated_norm_series(spec, times)
        if writer.dir is not None:
            rows = zip(series.t, series.l2_total, series.l2_left, series.l2_right)
            if "csv" in cfg.formats:
                write_csv(writer.dir / f"norms_{_tag(b)}.csv", ["t", "l2_total", "l2_left", "l2_right"], rows)
                report.artifacts.append(f"norms_{_tag(b)}.csv")
            if "svg" in cfg.formats:
                lines_svg(writer.dir / f"norms_{_tag(b)}.svg", series.t, {"l2_left": series.l2_left, "l2_right": series.l2_right}, f"b = {b:g}")
                report.artifacts.append(f"norms_{_tag(b)}.svg")
        left0, right0 = series.l2_left[0], series.l2_right[0]
        if b == 2.5:
            drift = max(np.max(np.abs(series.l2_left - left0)), np.max(np.abs(series.l2_right - right0)))
            report.add(Check(f"b={b:g}: norm drift", float(drift), 0.0, 1e-10, "<="))
        if b > 2.5 and right0 > 0:
            report.add(Check(f"b={b:g}: right-side growth rate over [{window[0]:g}, {window[1]:g}]", growth_rate_fit(series, "l2_right", window), b - 2.5, 0.05))
        if b > 2.5:
            rise = float(np.max(np.diff(series.l2_left)))
            report.add(Check(f"b={b:g}: largest increase of the left norm", rise, 0.0, 1e-12 * max(left0, 1.0), "<="))
        if b < 2.5:
            rise = float(np.max(np.diff(series.l2_right)))
            report.add(Check(f"b={b:g}: largest increase of the right norm", rise, 0.0, 1e-12 * max(right0, 1.0), "<="))
        if cfg.lambda0 is not None and b < 2.5 and 0 < cfg.lambda0 < 2.5 - b:
            mode = truncated_norm_series(IvpSpec(b, "l0_mode", T=T, params={"lambda0": cfg.lambda0}, grid=grid), times)
            report.add(Check(f"b={b:g}: unstable-mode left growth rate", growth_rate_fit(mode, "l2_left", window), cfg.lambda0, 0.01))
        lim = limit_integral_diagnostic(spec)
        report.metrics[f"b={b:g} limit integral"] = {"diverges": lim.diverges, "value": lim.value, "levels": list(lim.values)}


def _full(cfg, grid, report, writer):
    T = cfg.T or 1.0
    initial = cfg.initial or "bump"
    for b in cfg.b:
        if initial == "phi":
            v = phi(grid)
        elif initial == "bump":
            v = IvpSpec(b, "bump", params={"center": cfg.center if cfg.center is not None else -2.0, "width": cfg.width or 1.0}, grid=grid).v0(grid.nodes)
            v = grid.sample(lambda x, v=v: v)
        elif initial == "l0_mode":
            raise ConfigError("initial = l0_mode is only available for ivp-growth")
        else:
            params = {k: val for k, val in (("center", cfg.center), ("width", cfg.width)) if val is not None}
            spec = IvpSpec(b, initial, params=params, grid=grid)
            v = grid.sample(lambda x, spec=spec: spec.v0(x))
        if cfg.system == "eigp3":
            v = reformulate_tilde(v)
        trace = evolve_full(cfg.system, v, b, T, dt=cfg.dt)
        writer.emit(f"trace_{_tag(b)}", trace)
        scale = trace.l2_total**2
        report.add(Check(f"b={b:g}: max balance residual / ||w||^2", float(np.max(trace.balance_residual / scale)), 0.0, 1e-6, "<="))
        if b == 2 and cfg.system == "eigp4":
            report.add(
                Check("b=2: drift of <1, w>", float(np.max(np.abs(trace.inv_one - trace.inv_one[0]))), 0.0, 1e-6, "<="),
                Check("b=2: drift of <sgn, w>", float(np.max(np.abs(trace.inv_sgn - trace.inv_sgn[0]))), 0.0, 1e-6, "<="),
            )
        if initial == "phi" and cfg.system == "eigp4":
            exact = phi(grid) + (2 - b) * T * dphi(grid)
            report.add(Check(f"b={b:g}: distance to phi + (2-b) t phi' at t = {T:g}", l2_norm(trace.final - exact), 0.0, 1e-3, "<="))


def _appendix(cfg, grid, report, writer):
    for b in cfg.b:
        if b > 3:
            v = adjoint_null_vector(b, grid)
            report.add(Check(f"b={b:g}: ||L* v_b|| / ||v_b||", l2_norm(apply_operator("Lstar", v, b)) / l2_norm(v), 0.0, 1e-5, "<="))
        else:
            try:
                adjoint_null_vector(b, grid)
                raised = 0.0
            except DomainError:
                raised = 1.0
            report.add(Check(f"b={b:g}: odd null vector rejected (needs b > 3)", raised, 1.0, 0.0))


_RUNNERS = {
    "identities": _identities,
    "spectrum-scan": _spectrum,
    "ivp-growth": _ivp,
    "full-evolution": _full,
    "appendix-null": _appendix,
}


def run_scenario(cfg: ScenarioConfig) -> RunReport:
    """Run one scenario, write its artifacts and return the report."""
    validate(cfg)
    grid = build_grid(cfg.R, cfg.grid_n_half(), cfg.gamma)
    echo = cfg.to_dict()
    echo.pop("output_dir")
    echo["n_half"] = cfg.grid_n_half()
    report = RunReport(cfg.scenario, echo)
    writer = _Writer(cfg, report)
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.scenario](cfg, grid, report, writer)
    except PeakonLabError as exc:
        raise type(exc)(f"scenario {cfg.scenario}: {exc}") from exc
    report.timings["total_s"] = time.perf_counter() - t0
    if writer.dir is not None:
        for fmt_ in cfg.formats:
            path = writer.dir / f"report.{fmt_}"
            if fmt_ == "json":
                write_json(path, report.to_dict())
            else:
                getattr(report, f"to_{fmt_}")(path)
        write_json(writer.dir / "timings.json", report.timings)
    return report


def _formats(text):
    return _list(_choice(FORMATS))(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="peakonlab", description="Linearized peakon stability laboratory.")
    parser.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, else the config's output_dir)")
    parser.add_argument("--format", type=_formats, help="comma-separated subset of csv,json,svg")
    parser.add_argument("--threads", type=int, help="worker threads for independent spectral points")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the scenario described by a config file")
    run_p.add_argument("config")
    chk = sub.add_parser("check", help="run the built-in acceptance suite")
    chk.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    args = parser.parse_args(argv)
    out = args.out or os.environ.get(OUT_ENV)

    try:
        if args.command == "check":
            from .checks import CRITERIA, run_all

            which = [int(k) for k in args.criteria.split(",")] if args.criteria else list(CRITERIA)
            unknown = [k for k in which if k not in CRITERIA]
            if unknown:
                raise ConfigError(f"unknown criteria {unknown}")
            report = run_all(which)
            print(report.summary())
            if out:
                for fmt_ in args.format or ["json"]:
                    if fmt_ == "json":
                        write_json(Path(out) / "check.json", report.to_dict())
                    else:
                        getattr(report, f"to_{fmt_}")(Path(out) / f"check.{fmt_}")
                write_json(Path(out) / "timings.json", report.timings)
            return 0 if report.passed else 1

        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror or exc}") from exc
        cfg = parse_config(text)
        if out:
            cfg.output_dir = out
        if args.format:
            cfg.formats = args.format
        if args.threads:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.threads = args.threads
        report = run_scenario(cfg)
        print(report.summary())
        return 0 if report.passed else 1
    except (PeakonLabError, OSError) as exc:
        print(f"peakonlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
