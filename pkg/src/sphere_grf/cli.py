"""Command-line front end: ``sphere-grf <command> [flags]``.

Every command parses flags into a :class:`RunConfig`, calls library
functions, and writes CSV (tables, samples) or JSON (reports, models).
Outputs are written atomically; config errors exit with status 2 and a
one-line message, numerical failures with status 1.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import analysis, covariance, models, sampler, spectrum
from .errors import ConfigError, DivergenceError, DomainError, NotPSDError, TruncationError
from .specfun import JacobiPair

COMMANDS = (
    "simulate",
    "simulate-spacetime",
    "covariance",
    "verify-malyarenko",
    "verify-hilbert",
    "verify-identity",
    "classify",
    "fraclap",
    "holder",
)
STOCHASTIC = ("simulate", "simulate-spacetime", "holder")
# default truncation tolerance for covariance matrices (antipodal pairs need ~1/tol terms)
MATRIX_TOL = 1e-6


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str | None = None
    out: str | None = None
    seed: int | None = None
    tol: float | None = None
    replicates: int | None = None
    points: str | None = None
    times: str | None = None
    L: int | None = None
    gamma: float | None = None
    sigma: float | None = None
    v: tuple | None = None
    renormalize: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.model is None:
            raise ConfigError(f"{self.command} needs --model")
        if not os.path.isfile(self.model):
            raise ConfigError(f"model file not found: {self.model}")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("--tol must be positive")
        if self.replicates is not None and self.replicates < 1:
            raise ConfigError("--replicates must be positive")
        if self.L is not None and self.L < 0:
            raise ConfigError("--L must be nonnegative")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if self.command in STOCHASTIC and self.seed is None:
            raise ConfigError(f"{self.command} is stochastic and needs --seed")
        if self.v is not None and any(not x > 0 for x in self.v):
            raise ConfigError("--v entries must be positive")
        return self

    def to_argv(self):
        argv = [self.command]
        for f in dataclasses.fields(self):
            if f.name == "command":
                continue
            val = getattr(self, f.name)
            if val is None or val is False:
                continue
            flag = "--" + f.name
            if val is True:
                argv.append(flag)
            elif f.name == "v":
                argv.append(f"{flag}={','.join(repr(x) for x in val)}")
            else:
                # the = form keeps values like -1e-5 from reading as flags
                argv.append(f"{flag}={repr(val) if isinstance(val, float) else val}")
        return argv


def _v_list(text):
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid --v list {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("--v list is empty")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="sphere-grf", description="Isotropic Gaussian random fields on spheres.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--replicates", type=int)
    p.add_argument("--points")
    p.add_argument("--times")
    p.add_argument("--L", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--v", type=_v_list)
    p.add_argument("--renormalize", action="store_true")
    return p


def parse_config(argv):
    ns = build_parser().parse_args(list(argv))
    return RunConfig(**vars(ns)).validate()


# point / time specifications ------------------------------------------------


def parse_points(spec, d=2):
    """``grid:lat-lon:NxM``, ``greatcircle:N``, ``random:N:seed`` or a CSV file path."""
    if spec is None:
        raise ConfigError("--points is required")
    parts = spec.split(":")
    try:
        if parts[0] == "grid":
            if len(parts) != 3 or parts[1] != "lat-lon":
                raise ConfigError(f"bad grid spec {spec!r}; expected grid:lat-lon:NxM")
            n_lat, n_lon = (int(x) for x in parts[2].lower().split("x"))
            if d != 2:
                raise ConfigError("lat-lon grids need a model on S^2")
            if n_lat < 1 or n_lon < 1:
                raise ConfigError("grid sizes must be positive")
            theta = (np.arange(n_lat) + 0.5) * math.pi / n_lat
            phi = np.arange(n_lon) * 2.0 * math.pi / n_lon
            tt, pp = np.meshgrid(theta, phi, indexing="ij")
            return np.column_stack(
                [(np.sin(tt) * np.cos(pp)).ravel(), (np.sin(tt) * np.sin(pp)).ravel(), np.cos(tt).ravel()]
            )
        if parts[0] == "greatcircle":
            if len(parts) != 2:
                raise ConfigError(f"bad spec {spec!r}; expected greatcircle:N")
            n = int(parts[1])
            if n < 2:
                raise ConfigError("greatcircle needs at least 2 points")
            phi = np.arange(n) * 2.0 * math.pi / n
            pts = np.zeros((n, d + 1))
            pts[:, 0] = np.cos(phi)
            pts[:, 1] = np.sin(phi)
            return pts
        if parts[0] == "random":
            if len(parts) != 3:
                raise ConfigError(f"bad spec {spec!r}; expected random:N:seed")
            n, seed = int(parts[1]), int(parts[2])
            if n < 1 or seed < 0:
                raise ConfigError("random:N:seed needs N >= 1 and seed >= 0")
            g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed))).standard_normal((n, d + 1))
            return g / np.linalg.norm(g, axis=1, keepdims=True)
    except ValueError as exc:
        raise ConfigError(f"bad point spec {spec!r}: {exc}") from exc
    if not os.path.isfile(spec):
        raise ConfigError(f"unknown point spec or missing file: {spec!r}")
    rows = []
    with open(spec, encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                if rows:
                    raise ConfigError(f"non-numeric row in {spec}: {row}") from None
    if not rows:
        raise ConfigError(f"no coordinates in {spec}")
    pts = np.array(rows)
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    if pts.shape[1] != d + 1:
        raise ConfigError(f"points in {spec} live in R^{pts.shape[1]}, model needs R^{d + 1}")
    return pts


def parse_times(spec):
    if spec is None:
        raise ConfigError("--times start:step:count is required")
    try:
        start, step, count = spec.split(":")
        start, step, count = float(start), float(step), int(count)
    except ValueError as exc:
        raise ConfigError(f"bad --times {spec!r}; expected start:step:count") from exc
    if count < 1 or (count > 1 and not step > 0):
        raise ConfigError("--times needs count >= 1 and a positive step")
    return start + step * np.arange(count)


# output --------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg, text, stdout):
    if cfg.out is None:
        stdout.write(text)
    else:
        atomic_write(cfg.out, text)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _sample_csv(fs):
    vals = fs.values
    rows = []
    if fs.times is None:
        for r in range(vals.shape[0]):
            for p in range(vals.shape[1]):
                rows.append((r, p, vals[r, p]))
        return _csv(("replicate", "point_id", "value"), rows)
    for r in range(vals.shape[0]):
        for p in range(vals.shape[1]):
            for k, t in enumerate(fs.times):
                rows.append((r, p, t, vals[r, p, k]))
    return _csv(("replicate", "point_id", "time", "value"), rows)


def _sidecar(cfg, fs, doc):
    return {
        "seed": fs.seed,
        "stream": fs.stream,
        "method": fs.method,
        "L": fs.truncation_L,
        "jitter": fs.jitter_added,
        "truncation_bound": fs.truncation_bound,
        "replicates": fs.replicates,
        "model_hash": models.document_hash(doc),
        "points": cfg.points,
        "times": cfg.times,
    }


# commands ----------------------------------------------------------------------


def _load(cfg):
    raw = models.read_document(cfg.model)
    return models.model_from_doc(raw).normalized(), raw


def _tol(cfg, default):
    return cfg.tol if cfg.tol is not None else default


def _simulate_sample(cfg, md):
    spec = md.spectrum
    pts = parse_points(cfg.points, spec.d if spec.d is not None else 2)
    rng = sampler.RngSpec(cfg.seed)
    reps = cfg.replicates or 100
    if spec.d == 2 and cfg.L is not None:
        return sampler.sample_kl_sphere(spec, cfg.L, pts, reps, rng)
    cov = covariance.cov_matrix(spec, pts, tol=_tol(cfg, MATRIX_TOL))
    return sampler.sample_cholesky(cov, reps, rng)


def cmd_simulate(cfg, md, raw, stdout):
    fs = _simulate_sample(cfg, md)
    _emit(cfg, _sample_csv(fs), stdout)
    if cfg.out is not None:
        atomic_write(cfg.out + ".json", dumps_json(_sidecar(cfg, fs, raw)))


def cmd_simulate_spacetime(cfg, md, raw, stdout):
    model = md.space_time
    pts = parse_points(cfg.points, 2)
    times = parse_times(cfg.times)
    L = cfg.L if cfg.L is not None else max(model.spectrum.L, 0)
    fs = sampler.sample_spacetime(model, L, pts, times, cfg.replicates or 100, sampler.RngSpec(cfg.seed))
    _emit(cfg, _sample_csv(fs), stdout)
    if cfg.out is not None:
        atomic_write(cfg.out + ".json", dumps_json(_sidecar(cfg, fs, raw)))


def cmd_covariance(cfg, md, raw, stdout):
    spec = md.spectrum
    if cfg.points is not None:
        tol = _tol(cfg, MATRIX_TOL)
        pts = parse_points(cfg.points, spec.d if spec.d is not None else 2)
        if cfg.times is not None:
            times = parse_times(cfg.times)
            if times.size != pts.shape[0]:
                raise ConfigError("--times must give one time per point for a covariance matrix")
            cm = covariance.cov_matrix(md.space_time, pts, times=times, tol=tol, jitter="none")
        else:
            cm = covariance.cov_matrix(spec, pts, tol=tol, jitter="none")
        p = cm.size
        rows = [(i, j, cm.matrix[i, j]) for i in range(p) for j in range(i, p)]
        _emit(cfg, _csv(("i", "j", "value"), rows), stdout)
        return
    if cfg.v is None:
        raise ConfigError("covariance needs --points or --v")
    tol = _tol(cfg, 1e-8)
    v = np.array(cfg.v)
    if np.any(v > math.pi):
        raise ConfigError("--v angles must lie in (0, pi]")
    c = covariance.schoenberg_cov(spec, np.cos(v), tol)
    inc = covariance.incremental_variance(spec, v, tol)
    _emit(cfg, _csv(("v", "cov", "incvar"), zip(v, c, inc)), stdout)


def _ratio_csv(rs):
    rows = zip(rs.v, rs.ratios, rs.measured, rs.predicted, rs.bounds, rs.n_terms)
    return _csv(("v", "ratio", "measured", "predicted", "bound", "n_terms"), rows)


def cmd_verify_malyarenko(cfg, md, raw, stdout):
    rs = analysis.malyarenko_ratio(md.spectrum, cfg.v or (1e-1, 1e-2, 1e-3), rel_tol=_tol(cfg, 0.01))
    _emit(cfg, _ratio_csv(rs), stdout)


def cmd_verify_hilbert(cfg, md, raw, stdout):
    rs = analysis.hilbert_ratio(md.spectrum, cfg.v or (1e-1, 1e-2), rel_tol=_tol(cfg, 1e-8))
    _emit(cfg, _ratio_csv(rs), stdout)


def cmd_verify_identity(cfg, md, raw, stdout):
    spec = md.spectrum
    thetas = (0.1, 0.7, 2.5)
    pairs = ((0.0, 0.0), (0.5, 0.5), (1.5, 0.5))
    if not math.isinf(spec.lam) and (spec.lam - 0.5, spec.lam - 0.5) not in pairs:
        pairs = pairs + ((spec.lam - 0.5, spec.lam - 0.5),)
    n_max = cfg.L if cfg.L is not None else 50
    resid = max(
        analysis.jacobi_difference_check(n, JacobiPair(a, b), th)
        for n in range(n_max + 1)
        for a, b in pairs
        for th in thetas
    )
    tol = _tol(cfg, 1e-8)
    rows = []
    if not math.isinf(spec.lam):
        for v in cfg.v or (1e-1, 1e-2):
            d = covariance.incremental_variance_series(spec, v, tol, "DIRECT")
            s = covariance.incremental_variance_series(spec, v, tol, "STAR")
            rows.append({
                "v": v,
                "direct": d.value,
                "star": s.value,
                "difference": abs(d.value - s.value),
                "combined_bound": d.bound + s.bound,
                "agree": abs(d.value - s.value) <= d.bound + s.bound + 1e-14,
            })
    report = {
        "jacobi_max_residual": resid,
        "n_max": n_max,
        "thetas": thetas,
        "pairs": pairs,
        "star_vs_direct": rows,
    }
    _emit(cfg, dumps_json(report), stdout)


def cmd_classify(cfg, md, raw, stdout):
    spec = md.spectrum
    rep = analysis.regularity_report(spec)
    out = dataclasses.asdict(rep)
    if cfg.gamma is not None:
        out["summability"] = spectrum.summability_check(spec, cfg.gamma)
        out["integrability"] = analysis.integrability_check(spec, cfg.gamma)
    _emit(cfg, dumps_json(out), stdout)


def cmd_fraclap(cfg, md, raw, stdout):
    if cfg.sigma is None:
        raise ConfigError("fraclap needs --sigma")
    spec = spectrum.fractional_transform(md.spectrum, cfg.sigma, renormalize=cfg.renormalize)
    doc = models.model_to_doc(models.ModelDocument(spec, md.temporal, md.c_l))
    _emit(cfg, dumps_json(doc), stdout)


def cmd_holder(cfg, md, raw, stdout):
    spec = md.spectrum
    fs = _simulate_sample(
        dataclasses.replace(cfg, points=cfg.points or "greatcircle:256", tol=_tol(cfg, 1e-7)), md
    )
    vg = analysis.variogram_holder(fs)
    out = {"variogram": vg, "langschwab_gamma_sup": analysis.langschwab_gamma_sup(spec),
           "seed": fs.seed, "method": fs.method, "replicates": fs.replicates,
           "model_hash": models.document_hash(raw)}
    _emit(cfg, dumps_json(out), stdout)


HANDLERS = {
    "simulate": cmd_simulate,
    "simulate-spacetime": cmd_simulate_spacetime,
    "covariance": cmd_covariance,
    "verify-malyarenko": cmd_verify_malyarenko,
    "verify-hilbert": cmd_verify_hilbert,
    "verify-identity": cmd_verify_identity,
    "classify": cmd_classify,
    "fraclap": cmd_fraclap,
    "holder": cmd_holder,
}


def run(argv, stdout=None, stderr=None):
    """Execute one command; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg = parse_config(argv)
        md, raw = _load(cfg)
        HANDLERS[cfg.command](cfg, md, raw, stdout)
    except (ConfigError, DomainError, DivergenceError) as exc:
        stderr.write(f"sphere-grf: error: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}\n")
        return 2
    except (TruncationError, NotPSDError, OSError) as exc:
        stderr.write(f"sphere-grf: failed: {str(exc).splitlines()[0]}\n")
        return 1
    return 0


def main(argv=None):
    sys.exit(run(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
