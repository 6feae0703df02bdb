"""Command-line entry point.

Usage::

    spatial-hom --config run.cfg --out results/ [--seed N] [--scenario NAME]

The config file holds ``key = value`` lines with ``#`` comments. Command-line
flags override values from the file. Exit status is 0 on success, 2 for a
configuration error, 3 for a numeric or model error and 4 for an I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import MODEL_PARAMS, fit, similarity
from .detection import (
    APERTURES,
    DetectionGrid,
    JointDistribution,
    clean_axis,
    dip_distribution,
    resolved_scan,
    sample_counts,
    tandem_scan,
)
from .errors import ConfigError, DomainError, ModelError
from .interference import InterferenceModel
from .io import read_csv, to_csv
from .modes import PhotonPairConfig

SCENARIOS = ("joint2d", "delta-scan", "dip-scan", "sample", "fit", "similarity")
SOURCES = ("joint2d", "delta", "dip")
WEIGHTINGS = ("none", "poisson")
SEED_MAX = 2**64 - 1
AXES_TO_MODEL = {("y3", "y4"): "joint2d", ("delta",): "delta", ("Q",): "dip"}
DEFAULT_FREE = {"joint2d": ("amplitude", "V", "Q"), "delta": ("amplitude", "V", "Q"),
                "dip": ("amplitude", "V")}


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "joint2d"
    Q: float = 0.0
    d: float = 0.0
    w0: float = 0.666
    q_ref: float = 0.0
    V: float = 1.0
    range: float = 1.25
    step: float = 0.05
    w_R: float = 0.05
    aperture: str = "point"
    Q_min: float = -18.0
    Q_max: float = 18.0
    Q_step: float = 0.5
    source: str = "joint2d"
    events: float = 1e6
    seed: int = 0
    input: str = ""
    reference: str = ""
    fit_free: str = ""
    weighting: str = "none"
    plot: bool = False

    def pair(self) -> PhotonPairConfig:
        return PhotonPairConfig(Q=self.Q, d=self.d, w0=self.w0, q_ref=self.q_ref)

    def model(self) -> InterferenceModel:
        return InterferenceModel(self.pair(), visibility_V=self.V)

    def grid(self) -> DetectionGrid:
        return DetectionGrid(-self.range, self.range, self.step, self.w_R, self.aperture)

    def q_values(self) -> np.ndarray:
        n = int(round((self.Q_max - self.Q_min) / self.Q_step))
        return clean_axis(self.Q_min + self.Q_step * np.arange(n + 1))


FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _convert(key: str, raw: str, line: int | None):
    kind = FIELD_TYPES[key]
    try:
        if kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
        if kind == "int":
            return int(raw, 10)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {kind}", key, line) from None
    return raw


def _validate(cfg: RunConfig, lines: dict[str, int]) -> RunConfig:
    def fail(key: str, msg: str) -> None:
        raise ConfigError(msg, key, lines.get(key))

    if cfg.scenario not in SCENARIOS:
        fail("scenario", f"must be one of {', '.join(SCENARIOS)}")
    if cfg.w0 <= 0:
        fail("w0", "must be positive")
    if not 0.0 <= cfg.V <= 1.0:
        fail("V", "must lie in [0, 1]")
    if cfg.range <= 0:
        fail("range", "must be positive")
    if cfg.step <= 0:
        fail("step", "must be positive")
    n = 2 * cfg.range / cfg.step
    if abs(n - round(n)) > 1e-6:
        fail("step", "must divide the scan range 2 * range")
    if cfg.w_R < 0:
        fail("w_R", "must be non-negative")
    if cfg.aperture not in APERTURES:
        fail("aperture", f"must be one of {', '.join(APERTURES)}")
    if cfg.aperture != "point" and cfg.w_R > 2 * cfg.range:
        fail("w_R", "exceeds the scan range")
    if cfg.Q_step <= 0:
        fail("Q_step", "must be positive")
    if cfg.Q_min >= cfg.Q_max:
        fail("Q_max", "must exceed Q_min")
    n = (cfg.Q_max - cfg.Q_min) / cfg.Q_step
    if abs(n - round(n)) > 1e-6:
        fail("Q_step", "must divide Q_max - Q_min")
    if cfg.source not in SOURCES:
        fail("source", f"must be one of {', '.join(SOURCES)}")
    if cfg.events <= 0:
        fail("events", "must be positive")
    if not 0 <= cfg.seed <= SEED_MAX:
        fail("seed", "must be an unsigned 64-bit integer")
    if cfg.weighting not in WEIGHTINGS:
        fail("weighting", f"must be one of {', '.join(WEIGHTINGS)}")
    for name in _free_names(cfg):
        if name not in MODEL_PARAMS["joint2d"]:
            fail("fit_free", f"unknown parameter {name!r}")
    if cfg.scenario in ("fit", "similarity") and not cfg.input:
        fail("input", f"required by scenario {cfg.scenario}")
    if cfg.scenario == "similarity" and not cfg.reference:
        fail("reference", "required by scenario similarity")
    return cfg


def _free_names(cfg: RunConfig) -> list[str]:
    return [s.strip() for s in cfg.fit_free.split(",") if s.strip()]


def parse_config(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    """Parse ``key = value`` text into a validated :class:`RunConfig`.

    ``overrides`` (raw strings, e.g. from command-line flags) replace values
    from the text before validation.
    """
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", None, lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in FIELD_TYPES:
            raise ConfigError("unknown key", key, lineno)
        if key in values:
            raise ConfigError("duplicate key", key, lineno)
        values[key] = _convert(key, raw, lineno)
        lines[key] = lineno
    for key, raw in (overrides or {}).items():
        if key not in FIELD_TYPES:
            raise ConfigError("unknown key", key)
        values[key] = _convert(key, raw, None)
        lines.pop(key, None)
    return _validate(RunConfig(**values), lines)


def _hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _normalized_tandem(cfg: RunConfig) -> JointDistribution:
    scan = tandem_scan(cfg.model(), cfg.grid())
    scale = scan.meta["delta_scale"]
    return JointDistribution(scan.axes, scan.values / scale, scan.kind, scan.axis_names,
                             meta=scan.meta)


def _theory(cfg: RunConfig, kind: str) -> JointDistribution:
    if kind == "joint2d":
        return resolved_scan(cfg.model(), cfg.grid())
    if kind == "delta":
        return _normalized_tandem(cfg)
    return dip_distribution(cfg.pair(), cfg.V, cfg.q_values())


def _gnuplot(name: str, dist: JointDistribution) -> str:
    if dist.ndim == 2:
        return (f"set datafile separator ','\nset xlabel 'y3 (mm)'\nset ylabel 'y4 (mm)'\n"
                f"set view map\nsplot '{name}' every ::1 using 1:2:3 with image notitle\n")
    xlabel = "delta (mm)" if dist.axis_names == ("delta",) else "Q (1/mm)"
    col = 4 if dist.kind == "sampled" else 2
    return (f"set datafile separator ','\nset xlabel '{xlabel}'\n"
            f"plot '{name}' every ::1 using 1:{col} with linespoints notitle\n")


def run(cfg: RunConfig, out_dir: Path) -> dict[str, str]:
    """Execute one scenario, writing its outputs and ``manifest.json`` into ``out_dir``.

    Returns a map of output file name to sha256.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: dict[str, bytes] = {}
    results: dict[str, object] = {}

    def emit_csv(name: str, dist: JointDistribution) -> None:
        files[name] = to_csv(dist).encode("utf-8")
        if cfg.plot:
            files[name.rsplit(".", 1)[0] + ".gp"] = _gnuplot(name, dist).encode("utf-8")

    if cfg.scenario == "joint2d":
        dist = _theory(cfg, "joint2d")
        emit_csv("joint2d.csv", dist)
        results["warnings"] = dist.meta["warnings"]
    elif cfg.scenario == "delta-scan":
        dist = _theory(cfg, "delta")
        emit_csv("delta.csv", dist)
        results["warnings"] = dist.meta["warnings"]
    elif cfg.scenario == "dip-scan":
        emit_csv("dip.csv", _theory(cfg, "dip"))
    elif cfg.scenario == "sample":
        sampled = sample_counts(_theory(cfg, cfg.source), cfg.events, cfg.seed)
        emit_csv(f"{cfg.source}_sampled.csv", sampled)
        results["expected_total"] = sampled.meta["expected_total"]
        results["total_counts"] = int(sampled.values.sum())
    elif cfg.scenario == "fit":
        data = read_csv(Path(cfg.input))
        kind = AXES_TO_MODEL[data.axis_names]
        free = _free_names(cfg) or list(DEFAULT_FREE[kind])
        if "amplitude" not in free:
            free.append("amplitude")
        params = MODEL_PARAMS[kind]
        unknown = [n for n in free if n not in params]
        if unknown:
            raise ConfigError(f"{unknown} are not parameters of the {kind} model", "fit_free")
        current = {"V": cfg.V, "Q": cfg.Q, "d": cfg.d, "w0": cfg.w0}
        fixed = {n: current[n] for n in params if n not in free}
        result = fit(data, kind, fixed=fixed, weighting=cfg.weighting)
        curve = JointDistribution(data.axes, result.evaluate(data.axes), "analytic", data.axis_names)
        emit_csv("fit_curve.csv", curve)
        report = {
            "model_kind": result.model_kind, "params": result.params, "fixed": result.fixed,
            "residual_rms": result.residual_rms, "iterations": result.iterations,
            "converged": result.converged, "weighting": result.weighting,
        }
        files["fit.json"] = (json.dumps(report, sort_keys=True, indent=2) + "\n").encode("utf-8")
        results["fit"] = report
    elif cfg.scenario == "similarity":
        a = read_csv(Path(cfg.input))
        b = read_csv(Path(cfg.reference))
        s = similarity(a, b)
        files["similarity.json"] = (json.dumps({"S": s}, indent=2) + "\n").encode("utf-8")
        results["S"] = s

    hashes = {}
    for name in sorted(files):
        (out_dir / name).write_bytes(files[name])
        hashes[name] = _hash(files[name])
    manifest = {
        "artifact": "spatial_hom",
        "version": __version__,
        "scenario": cfg.scenario,
        "parameters": dataclasses.asdict(cfg),
        "seed": cfg.seed,
        "outputs": hashes,
        "results": results,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n",
                                           encoding="utf-8")
    return hashes


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spatial-hom",
                                description="Spatially resolved two-photon interference simulator.")
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--seed", help="RNG seed (unsigned 64-bit), overrides the file")
    p.add_argument("--scenario", help=f"one of {', '.join(SCENARIOS)}, overrides the file")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in (("seed", args.seed), ("scenario", args.scenario)) if v is not None}
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 4
    try:
        cfg = parse_config(text, overrides)
        run(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, DomainError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
