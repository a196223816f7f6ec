"""Execution of a :class:`RunSpec`: one pipeline per mode, sweeps, result bundles."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import itertools
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bath import BathSpec, lead_correlators
from .born import born_current, integrate_born, kubo_current, rho_down_down
from .config import RunSpec
from .errors import NumericalError, ValidationError
from .junction import JunctionSpec
from .oracle import AbsorberSpec, ChainModel, ChainSpec, ensemble_average, evolve_unitary, lead_kernels
from .spectral import (
    asymptotic_current,
    rectification,
    rectification_from_values,
    spectral_function_closed,
)
from .steady import steady_pipeline

THREADS_ENV = "SPINJUNCTION_THREADS"


@dataclass
class ResultBundle:
    spec: dict
    out_dir: str
    artifacts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    steps: int = 0
    warnings: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def add(self, path: Path):
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        self.artifacts.append({"file": Path(path).name, "sha256": digest})

    def write_manifest(self) -> Path:
        path = Path(self.out_dir) / "manifest.json"
        data = {
            "spec": self.spec,
            "artifacts": self.artifacts,
            "summary": self.summary,
            "wall_clock_seconds": self.wall_clock,
            "steps": self.steps,
            "warnings": self.warnings,
            "failures": self.failures,
        }
        path.write_text(json.dumps(data, indent=2, default=_json_default))
        return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def default_threads(flag=None) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


# ---------------------------------------------------------------------------
# spec translation
# ---------------------------------------------------------------------------


def make_baths(spec: RunSpec) -> tuple[BathSpec, BathSpec]:
    lc = spec.lead
    beta = math.inf if lc.beta is None else lc.beta
    return (BathSpec(lc.J, lc.Jz, lc.mu, beta, "up"), BathSpec(lc.J, lc.Jz, lc.mu, beta, "down"))


def make_junction(spec: RunSpec) -> JunctionSpec:
    j = spec.junction
    return JunctionSpec(j.J_S, j.Delta, j.Jz_sys, j.gamma)


def make_chain(spec: RunSpec, junction: JunctionSpec | None = None) -> ChainSpec:
    o = spec.oracle
    return ChainSpec(o.N_L, o.N_R, make_baths(spec), junction or make_junction(spec),
                     contact=o.contact, max_excitations=o.max_excitations)


@lru_cache(maxsize=32)
def _cached_correlators(bath: BathSpec, kind: str) -> dict:
    return lead_correlators(bath, kind)


def make_kernels(spec: RunSpec, baths):
    kind = spec.lead.kernel
    if kind == "hp":
        return None
    if kind == "quadrature":
        return {side: _cached_correlators(b, "quadrature") for side, b in zip(("L", "R"), baths)}
    return lead_kernels(make_chain(spec), spec.numerics.dt, spec.numerics.T)


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------


def _write_trace(trace, path: Path, bundle: ResultBundle):
    trace.to_csv(path)
    bundle.add(path)


def _mode_correlations(spec, out, bundle):
    baths = make_baths(spec)
    kind = "quadrature" if spec.lead.kernel == "quadrature" else "hp"
    for side, bath in zip(("L", "R"), baths):
        k = _cached_correlators(bath, kind)
        ch = "h" if bath.polarization == "up" else "p"
        path = out / f"correlation_{side}.csv"
        k[ch].to_csv(path, spec.numerics.dt, spec.numerics.T)
        bundle.add(path)
    return {"kernel": kind}


def _mode_born(spec, out, bundle):
    baths, junction = make_baths(spec), make_junction(spec)
    n = spec.numerics
    hist = integrate_born(rho_down_down(), junction, baths, n.dt, n.T, make_kernels(spec, baths))
    trace = born_current(hist)
    _write_trace(trace, out / "current_born.csv", bundle)
    bundle.steps += len(trace.times) - 1
    return {"I_final": float(trace.I[-1]), "I_max": float(np.max(trace.I)),
            "min_eigenvalue": hist.metadata["min_eigenvalue"]}


def _mode_kubo(spec, out, bundle):
    baths, junction = make_baths(spec), make_junction(spec)
    n = spec.numerics
    trace = kubo_current(junction, baths, rho_down_down(), n.T, n.dt, make_kernels(spec, baths))
    _write_trace(trace, out / "current_kubo.csv", bundle)
    bundle.steps += len(trace.times) - 1
    return {"I_final": float(trace.I[-1]), "I_max": float(np.max(trace.I))}


def _steady(spec, junction=None):
    return steady_pipeline(junction or make_junction(spec), make_baths(spec),
                           spec.numerics.generator, spec.numerics.damping)


def _mode_steady(spec, out, bundle):
    report = _steady(spec)
    path = out / "steady.json"
    report.to_json(path)
    bundle.add(path)
    bundle.warnings += report.warnings
    return {"I": report.I, "I_L": report.I_L, "I_R": report.I_R, "residual": report.residual,
            "trace_error": report.trace_error, "min_eigenvalue": report.min_eigenvalue, "gap": report.gap}


def _mode_spectral(spec, out, bundle):
    report = _steady(spec)
    n = spec.numerics
    omega = np.linspace(n.omega_min, n.omega_max, n.n_omega)
    series = spectral_function_closed(report.rho, make_junction(spec), make_baths(spec), omega, n.damping)
    path = out / "spectral.csv"
    series.to_csv(path)
    bundle.add(path)
    a0 = float(spectral_function_closed(report.rho, make_junction(spec), make_baths(spec), [0.0], n.damping).A[0])
    return {"A0": a0, "eta": n.damping, "convention": series.convention,
            "I_from_A0": 8 * spec.junction.gamma**2 * a0, "I_steady": report.I}


def _rectify_currents(spec, junction):
    n = spec.numerics
    baths = make_baths(spec)
    method = n.rectify_method
    if method == "steady":
        return _steady(spec, junction).I
    if method == "kubo-asymptotic":
        return asymptotic_current(rho_down_down(), junction, baths, n.damping)
    if method == "kubo":
        return kubo_current(junction, baths, rho_down_down(), n.T, n.dt, make_kernels(spec, baths))
    return born_current(integrate_born(rho_down_down(), junction, baths, n.dt, n.T, make_kernels(spec, baths)))


def _mode_rectify(spec, out, bundle):
    j = make_junction(spec)
    plus, minus = _rectify_currents(spec, j), _rectify_currents(spec, j.mirrored())
    if isinstance(plus, float):
        rep = rectification_from_values(plus, minus, j.Delta, None, spec.numerics.rectify_method)
    else:
        rep = rectification(plus, minus, spec.numerics.T, j.Delta)
        rep.method = spec.numerics.rectify_method
    path = out / "rectify.json"
    rep.to_json(path)
    bundle.add(path)
    return rep.to_dict()


def _mode_oracle(spec, out, bundle):
    o, n = spec.oracle, spec.numerics
    chain = make_chain(spec)
    runs = [o.absorbers] if not o.compare_absorbers else [False, True]
    summary = {}
    for absorbing in runs:
        tag = "absorbing" if absorbing else "closed"
        if absorbing:
            ab = AbsorberSpec(o.gamma_B, o.amplitude)
            model = ChainModel(chain, sector=False)
            ens, _ = ensemble_average(chain, (ab, ab), o.trajectories, spec.seed, o.trajectory_dt, n.T,
                                      o.record_dt, model=model)
            path = out / f"bond_currents_{tag}.csv"
            ens.to_csv(path)
            trace = ens.current_trace(model)
            bundle.steps += int(round(n.T / o.trajectory_dt)) * o.trajectories
        else:
            model = ChainModel(chain, sector=o.max_excitations is None)
            ev = evolve_unitary(chain, n.dt, n.T, o.tol, model=model)
            path = out / f"bond_currents_{tag}.csv"
            ev.to_csv(path)
            trace = ev.current_trace(model)
            bundle.steps += len(ev.times) - 1
        bundle.add(path)
        _write_trace(trace, out / f"current_oracle_{tag}.csv", bundle)
        summary[tag] = {"I_final": float(trace.I[-1]), "I_max": float(np.max(trace.I)), "dim": model.dim}
    return summary


MODE_RUNNERS = {
    "correlations": _mode_correlations,
    "born": _mode_born,
    "kubo": _mode_kubo,
    "steady": _mode_steady,
    "spectral": _mode_spectral,
    "rectify": _mode_rectify,
    "oracle": _mode_oracle,
}


def _run_single(spec: RunSpec, out: Path, bundle: ResultBundle) -> dict:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        summary = MODE_RUNNERS[spec.mode](spec, out, bundle)
    bundle.warnings += [f"{w.category.__name__}: {w.message}" for w in caught]
    return summary


def run(spec: RunSpec, out_dir=None, threads: int | None = None) -> ResultBundle:
    """Execute ``spec`` and write its artifacts plus a manifest into ``out_dir``."""
    problems = spec.problems()
    if problems:
        raise ValidationError("; ".join(problems), [p.split(":")[0] for p in problems])
    out = Path(out_dir or spec.out)
    out.mkdir(parents=True, exist_ok=True)
    bundle = ResultBundle(spec.to_dict(), str(out))
    start = time.perf_counter()
    echo = out / "runspec.json"
    echo.write_text(spec.to_json())
    bundle.add(echo)
    if spec.mode == "sweep":
        bundle.summary = _run_sweep(spec, out, bundle, default_threads(threads))
    else:
        bundle.summary = _run_single(spec, out, bundle)
    bundle.wall_clock = time.perf_counter() - start
    bundle.write_manifest()
    return bundle


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def sweep(spec: RunSpec, out_dir=None, threads: int | None = None) -> ResultBundle:
    """Run ``spec.sweep`` over its grid or point list and merge the results into sweep.csv."""
    return run(dataclasses.replace(spec, mode="sweep"), out_dir, threads)


def sweep_points(spec: RunSpec) -> list[dict]:
    sw = spec.sweep
    pts = [dict(p) for p in sw.points]
    if sw.grid:
        keys = sorted(sw.grid)
        for combo in itertools.product(*(sw.grid[k] for k in keys)):
            pts.append(dict(zip(keys, combo)))
    if not pts:
        pts = [{}]
    if sw.paired_delta:
        d = abs(spec.junction.Delta)
        pts = [dict(p, **{"junction.Delta": s * p.get("junction.Delta", d)}) for p in pts for s in (1, -1)]
    return pts


def _point_worker(args):
    base, overrides, point_dir = args
    try:
        spec = RunSpec.from_dict(base).with_overrides(dict(overrides, mode=base["sweep"]["mode"]))
        Path(point_dir).mkdir(parents=True, exist_ok=True)
        bundle = ResultBundle(spec.to_dict(), point_dir)
        summary = _run_single(spec, Path(point_dir), bundle)
        return {"ok": True, "summary": summary, "artifacts": bundle.artifacts,
                "warnings": bundle.warnings, "steps": bundle.steps}
    except (ValidationError, NumericalError, ArithmeticError) as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}"}


def _flatten(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}{k}.", v, out)
    elif isinstance(obj, (int, float, str, bool)) or obj is None:
        out[prefix[:-1]] = obj


def _run_sweep(spec: RunSpec, out: Path, bundle: ResultBundle, threads: int) -> dict:
    pts = sweep_points(spec)
    base = spec.to_dict()
    jobs = [(base, p, str(out / f"point_{i:04d}")) for i, p in enumerate(pts)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_point_worker, jobs))
    else:
        results = [_point_worker(j) for j in jobs]
    rows = []
    keys = sorted({k for p in pts for k in p})
    for i, (p, res) in enumerate(zip(pts, results)):
        row = {k: p.get(k) for k in keys}
        if res["ok"]:
            flat = {}
            _flatten("", res["summary"], flat)
            row.update(flat)
            bundle.steps += res["steps"]
            bundle.warnings += [f"point {i}: {w}" for w in res["warnings"]]
            bundle.artifacts += [dict(a, file=f"point_{i:04d}/{a['file']}") for a in res["artifacts"]]
        else:
            bundle.failures.append({"point": i, "parameters": p, "error": res["error"]})
            row["error"] = res["error"]
        rows.append(row)
    columns = list(dict.fromkeys(k for r in rows for k in r))
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow(r)
    bundle.add(path)
    summary = {"points": len(pts), "failed": len(bundle.failures)}
    if spec.sweep.paired_delta:
        summary["rectification"] = _paired_rectification(rows)
    return summary


def _paired_rectification(rows):
    out = []
    current_key = next((k for k in ("I", "I_final") if k in rows[0]), None) if rows else None
    for plus, minus in zip(rows[0::2], rows[1::2]):
        entry = {k: v for k, v in plus.items() if k != "junction.Delta" and "." in k and k in minus}
        try:
            rep = rectification_from_values(plus[current_key], minus[current_key], plus["junction.Delta"])
            entry.update(R=rep.R, D=rep.D)
        except (KeyError, TypeError, NumericalError) as exc:
            entry["error"] = str(exc)
        out.append(entry)
    return out
