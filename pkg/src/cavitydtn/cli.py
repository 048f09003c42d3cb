"""Command-line front end: ``cavitydtn solve <config.json>``.

The configuration is JSON.  Complex numbers are two-element arrays
``[re, im]``; angles are radians unless the key ends in ``_deg``.  A
minimal TM run::

    {
      "polarization": "TM",
      "geometry": {"width": 0.0625, "depth": 0.015625, "R": 0.03125, "R_hat": 0.0078125},
      "wave": {"kappa0": 100.53096491487338, "theta": 1.0471975511965976},
      "dtn": {"N": 20}
    }

Exit status: 0 success, 2 configuration error, 3 numerical failure.
The log level comes from the ``CAVITYDTN_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .adapt import AdaptConfig, write_convergence_csv
from .geometry import Coating, CavityGeometry, GeometryError, Hump, rectangular_cavity, write_mesh
from .physics import POLARIZATIONS, TE
from .rcs import FORMULAS, Problem, RcsCurve, RcsSample, backscatter_angle, kappa0_from_ghz, rcs, to_db, write_rcs_csv

log = logging.getLogger("cavitydtn")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def _get(d: dict, key: str, path: str, kind=None, default: Any = ..., ):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    v = d[key]
    if kind is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{path}.{key}: expected a finite number, got {v!r}")
        return float(v)
    if kind is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
        return v
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {type(v).__name__}")
    return v


def _complex(v: Any, path: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{path}: expected a number or [re, im], got {v!r}")


def _unknown(d: dict, allowed: set[str], path: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(extra)}")


def _angle(d: dict, key: str, path: str, default: Any = ...):
    has_rad, has_deg = key in d, f"{key}_deg" in d
    if has_rad and has_deg:
        raise ConfigError(f"{path}: give only one of {key} and {key}_deg")
    if has_deg:
        return math.radians(_get(d, f"{key}_deg", path, float))
    return _get(d, key, path, float, default)


def _sweep(value: Any, path: str, deg: bool = False) -> list[float]:
    if isinstance(value, list):
        vals = [_complex(v, f"{path}[{i}]").real for i, v in enumerate(value)]
    elif isinstance(value, dict):
        _unknown(value, {"start", "stop", "count"}, path)
        n = _get(value, "count", path, int)
        if n < 1:
            raise ConfigError(f"{path}.count: must be at least 1")
        vals = np.linspace(_get(value, "start", path, float), _get(value, "stop", path, float), n).tolist()
    else:
        raise ConfigError(f"{path}: expected a list or {{start, stop, count}}")
    if not vals:
        raise ConfigError(f"{path}: sweep is empty")
    return [math.radians(v) for v in vals] if deg else vals


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    polarization: str
    geometry: CavityGeometry
    materials: dict[int, tuple[complex, complex]]
    kappa0: float | None
    theta: float | None
    thetas: list[float] | None
    frequencies_ghz: list[float] | None
    N: int | None
    adapt: AdaptConfig
    formulas: tuple[str, ...]
    outputs: dict[str, str | None] = field(default_factory=dict)

    @property
    def sweep_axis(self) -> str:
        return "frequency_ghz" if self.frequencies_ghz is not None else "theta"

    @property
    def sweep(self) -> list[float]:
        return self.frequencies_ghz if self.frequencies_ghz is not None else self.thetas  # type: ignore[return-value]

    def problem(self) -> Problem:
        return Problem(
            polarization=self.polarization,
            geometry=self.geometry,
            materials=self.materials,
            adapt=self.adapt,
            N=self.N,
            formulas=self.formulas,
            kappa0=self.kappa0,
            theta=self.theta,
        )


def _parse_materials(d: Any) -> dict[str, tuple[complex, complex]]:
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise ConfigError("materials: expected an object of named materials")
    out = {}
    for name, m in d.items():
        p = f"materials.{name}"
        if not isinstance(m, dict):
            raise ConfigError(f"{p}: expected an object")
        _unknown(m, {"eps_r", "mu_r"}, p)
        eps = _complex(m.get("eps_r", 1.0), f"{p}.eps_r")
        mu = _complex(m.get("mu_r", 1.0), f"{p}.mu_r")
        if eps.imag < 0 or mu.imag < 0:
            raise ConfigError(f"{p}: passive media need Im(eps_r) >= 0 and Im(mu_r) >= 0")
        out[name] = (eps, mu)
    return out


def _parse_geometry(g: Any, named: dict[str, tuple[complex, complex]]):
    p = "geometry"
    if not isinstance(g, dict):
        raise ConfigError(f"{p}: expected an object")
    _unknown(g, {"width", "depth", "polygon", "R", "R_hat", "coatings", "humps", "fill"}, p)
    R = _get(g, "R", p, float)
    R_hat = _get(g, "R_hat", p, float)
    regions: dict[int, tuple[complex, complex]] = {}
    fill = _get(g, "fill", p, str, None)
    if fill is not None:
        if fill not in named:
            raise ConfigError(f"{p}.fill: material {fill!r} is not defined")
        regions[1] = named[fill]

    humps = []
    for i, h in enumerate(_get(g, "humps", p, list, [])):
        hp = f"{p}.humps[{i}]"
        if not isinstance(h, dict):
            raise ConfigError(f"{hp}: expected an object")
        _unknown(h, {"x0", "x1", "y0", "y1"}, hp)
        humps.append(Hump(*(_get(h, k, hp, float) for k in ("x0", "x1", "y0", "y1"))))

    coatings_spec = _get(g, "coatings", p, list, [])
    try:
        if "polygon" in g:
            if "width" in g or "depth" in g:
                raise ConfigError(f"{p}: give either polygon or width/depth, not both")
            pts = tuple((float(a), float(b)) for a, b in _get(g, "polygon", p, list))
            coatings = []
            for i, c in enumerate(coatings_spec):
                cp = f"{p}.coatings[{i}]"
                _unknown(c, {"polygon", "material"}, cp)
                mat = _get(c, "material", cp, str)
                if mat not in named:
                    raise ConfigError(f"{cp}.material: material {mat!r} is not defined")
                rid = 2 + i
                regions[rid] = named[mat]
                coatings.append(Coating(tuple((float(a), float(b)) for a, b in _get(c, "polygon", cp, list)), rid))
            geom = CavityGeometry(R=R, R_hat=R_hat, cavity_polygon=pts, humps=tuple(humps), coatings=tuple(coatings))
        else:
            width = _get(g, "width", p, float)
            depth = _get(g, "depth", p, float)
            if len(coatings_spec) > 1:
                raise ConfigError(f"{p}.coatings: a rectangular cavity takes one wall coating")
            thickness = None
            if coatings_spec:
                cp = f"{p}.coatings[0]"
                c = coatings_spec[0]
                if not isinstance(c, dict):
                    raise ConfigError(f"{cp}: expected an object")
                _unknown(c, {"thickness", "material"}, cp)
                thickness = _get(c, "thickness", cp, float)
                mat = _get(c, "material", cp, str)
                if mat not in named:
                    raise ConfigError(f"{cp}.material: material {mat!r} is not defined")
                regions[2] = named[mat]
            geom = rectangular_cavity(width, depth, R, R_hat, coating_thickness=thickness, humps=humps)
    except GeometryError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{p}: {exc}") from exc
    return geom, regions


def parse_config(text: str) -> RunConfig:
    """Validate a JSON configuration and apply defaults."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("top level must be an object")
    _unknown(d, {"polarization", "geometry", "materials", "wave", "dtn", "adapt", "rcs", "outputs", "name"}, "config")
    pol = _get(d, "polarization", "config", str)
    if pol not in POLARIZATIONS:
        raise ConfigError(f"config.polarization: expected 'TM' or 'TE', got {pol!r}")

    named = _parse_materials(d.get("materials"))
    geom, regions = _parse_geometry(_get(d, "geometry", "config", dict), named)
    if pol == TE and any(mu != 1 for _, mu in regions.values()):
        raise ConfigError("materials: TE polarization requires mu_r = 1 everywhere")

    w = _get(d, "wave", "config", dict)
    _unknown(w, {"kappa0", "frequency_ghz", "theta", "theta_deg", "theta_sweep", "theta_sweep_deg", "frequency_sweep_ghz"}, "wave")
    kappa0 = _get(w, "kappa0", "wave", float, None)
    freq = _get(w, "frequency_ghz", "wave", float, None)
    fsweep = w.get("frequency_sweep_ghz")
    if fsweep is not None and (kappa0 is not None or freq is not None):
        raise ConfigError("wave: a frequency sweep excludes kappa0 and frequency_ghz")
    if fsweep is None:
        if (kappa0 is None) == (freq is None):
            raise ConfigError("wave: give exactly one of kappa0 and frequency_ghz")
        if freq is not None:
            if not freq > 0:
                raise ConfigError("wave.frequency_ghz: must be positive")
            kappa0 = kappa0_from_ghz(freq)
        if not kappa0 > 0:
            raise ConfigError("wave.kappa0: must be positive")
    theta = _angle(w, "theta", "wave", None)
    tsweep_keys = [k for k in ("theta_sweep", "theta_sweep_deg") if k in w]
    if len(tsweep_keys) > 1:
        raise ConfigError("wave: give only one of theta_sweep and theta_sweep_deg")
    axes = [theta is not None or bool(tsweep_keys), fsweep is not None]
    thetas = frequencies = None
    if tsweep_keys:
        if theta is not None:
            raise ConfigError("wave: give either theta or a theta sweep")
        key = tsweep_keys[0]
        thetas = _sweep(w[key], f"wave.{key}", deg=key.endswith("_deg"))
    elif fsweep is not None:
        if theta is None:
            raise ConfigError("wave.theta: a frequency sweep needs a fixed incident angle")
        frequencies = _sweep(fsweep, "wave.frequency_sweep_ghz")
        if min(frequencies) <= 0:
            raise ConfigError("wave.frequency_sweep_ghz: frequencies must be positive")
    elif theta is not None:
        thetas = [theta]
    else:
        raise ConfigError("wave.theta: required field is missing")
    if not any(axes):
        raise ConfigError("wave: no sweep axis")
    for t in thetas or [theta]:
        if not -0.5 * math.pi - 1e-12 <= t <= 0.5 * math.pi + 1e-12:
            raise ConfigError(f"wave: incident angle {t} outside [-pi/2, pi/2]")
    if thetas is not None:
        thetas = [min(max(t, -0.5 * math.pi), 0.5 * math.pi) for t in thetas]

    dt = _get(d, "dtn", "config", dict, {})
    _unknown(dt, {"N", "epsN_target"}, "dtn")
    Nv = dt.get("N", "auto")
    if Nv == "auto":
        N = None
    elif isinstance(Nv, int) and not isinstance(Nv, bool) and Nv >= 1:
        N = Nv
    else:
        raise ConfigError(f"dtn.N: expected 'auto' or a positive integer, got {Nv!r}")
    epsN = _get(dt, "epsN_target", "dtn", float, 1e-8)

    a = _get(d, "adapt", "config", dict, {})
    _unknown(a, {"tau", "tol", "max_dof", "max_iter", "mode", "h0"}, "adapt")
    try:
        acfg = AdaptConfig(
            tau=_get(a, "tau", "adapt", float, 0.5),
            tol=_get(a, "tol", "adapt", float, 0.0),
            max_dof=_get(a, "max_dof", "adapt", int, 15000),
            max_iter=_get(a, "max_iter", "adapt", int, 50),
            epsN_target=epsN,
            h0=_get(a, "h0", "adapt", float, None),
            mode=_get(a, "mode", "adapt", str, "adaptive"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"adapt: {exc}") from exc

    r = _get(d, "rcs", "config", dict, {})
    _unknown(r, {"formulas"}, "rcs")
    formulas = tuple(_get(r, "formulas", "rcs", list, ["semicircle"]))
    if not formulas or any(f not in FORMULAS for f in formulas):
        raise ConfigError(f"rcs.formulas: expected a non-empty subset of {list(FORMULAS)}")
    if "aperture" in formulas and any(h.y1 > 0 for h in geom.humps):
        raise ConfigError("rcs.formulas: the aperture formula needs a structure below the ground line")

    o = _get(d, "outputs", "config", dict, {})
    _unknown(o, {"rcs_csv", "convergence_csv", "mesh_dir"}, "outputs")
    outputs = {
        "rcs_csv": _get(o, "rcs_csv", "outputs", str, "rcs.csv"),
        "convergence_csv": _get(o, "convergence_csv", "outputs", str, "convergence.csv"),
        "mesh_dir": _get(o, "mesh_dir", "outputs", str, None),
    }
    return RunConfig(
        polarization=pol,
        geometry=geom,
        materials=regions,
        kappa0=kappa0,
        theta=theta,
        thetas=thetas,
        frequencies_ghz=frequencies,
        N=N,
        adapt=acfg,
        formulas=formulas,
        outputs=outputs,
    )


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def _indexed(path: Path, index: int, count: int) -> Path:
    return path if count == 1 else path.with_name(f"{path.stem}_{index:03d}{path.suffix}")


def run(cfg: RunConfig, out_dir: Path, threads: int = 1) -> int:
    """Run every sweep point, write the CSV files and return an exit status."""
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = cfg.problem()
    params = cfg.sweep
    conv_path = out_dir / cfg.outputs["convergence_csv"]
    mesh_dir = out_dir / cfg.outputs["mesh_dir"] if cfg.outputs.get("mesh_dir") else None
    if mesh_dir is not None:
        mesh_dir.mkdir(parents=True, exist_ok=True)
    lock = threading.Lock()

    def point(i: int) -> dict[str, float]:
        p = params[i]
        if cfg.sweep_axis == "theta":
            k0, th = cfg.kappa0, p
        else:
            k0, th = kappa0_from_ghz(p), cfg.theta
        dumps: list = []

        def keep(sol, rep):
            if mesh_dir is not None:
                dumps.append((rep.iteration, sol.mesh))

        try:
            sol, history = problem.solve(k0, th, on_iteration=keep)
            values = {f: rcs(sol, f) for f in cfg.formulas}
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            log.error("sweep point %d (%s = %g) failed: %s", i, cfg.sweep_axis, p, exc)
            return {f: math.nan for f in cfg.formulas}
        with lock:
            write_convergence_csv(history, _indexed(conv_path, i, len(params)))
            for it, mesh in dumps:
                write_mesh(mesh, mesh_dir / f"mesh_{i:03d}_{it:03d}.txt")
        log.info("%s = %g: %s", cfg.sweep_axis, p, ", ".join(f"{f} {v:.6g}" for f, v in values.items()))
        return values

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, range(len(params))))
    else:
        results = [point(i) for i in range(len(params))]

    curve = RcsCurve(cfg.polarization)
    for f in cfg.formulas:
        for p, res in zip(params, results):
            curve.samples.append(RcsSample(float(p), res[f], to_db(res[f]), f))
    write_rcs_csv(curve, out_dir / cfg.outputs["rcs_csv"])
    failed = sum(any(math.isnan(v) for v in r.values()) for r in results)
    if failed:
        log.error("%d of %d sweep points failed", failed, len(params))
        return EXIT_NUMERIC
    return EXIT_OK


def _setup_logging() -> None:
    level = os.environ.get("CAVITYDTN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cavitydtn", description="Adaptive FEM-DtN solver for open-cavity scattering")
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run a configuration file")
    s.add_argument("config", type=Path)
    s.add_argument("--mode", choices=("adaptive", "uniform"))
    s.add_argument("--max-dof", type=int)
    s.add_argument("--out", type=Path, default=Path("."))
    s.add_argument("--threads", type=int, default=1)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        changes = {}
        if args.mode is not None:
            changes["mode"] = args.mode
        if args.max_dof is not None:
            if args.max_dof < 1:
                raise ConfigError("--max-dof must be positive")
            changes["max_dof"] = args.max_dof
        if changes:
            cfg.adapt = replace(cfg.adapt, **changes)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg, args.out, args.threads)
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
