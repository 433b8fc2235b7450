"""Command-line front end.

    bergkern <command> --config run.json [--n N] [--out path] [--format csv|json]
                       [--threads N] [--seed S]

Every command reads one JSON config document (flags override it), runs the
matching library routine and writes a report: a JSON envelope, or a CSV
table plus a ``<stem>.summary.json`` sidecar. Errors go to stderr as a JSON
record; the exit code is 2 for bad input and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import geometry, kernels, limits, quad, specfun, stats
from .errors import BergkernError, ValidationError
from .potentials import PotentialModel, RadialProfile

SCHEMA = "bergkern/1"
COMMANDS = (
    "kernel", "droplet", "obstacle", "edge-limit", "bulk-limit",
    "partial-kernel", "moments", "variance", "identity-check",
)


# -- config helpers -----------------------------------------------------------

def _complex(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValidationError(f"complex numbers are [re, im] pairs, got {x!r}")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, (int, float)):
        return complex(float(x), 0.0)
    raise ValidationError(f"cannot read a complex number from {x!r}")


def _cvec(x) -> np.ndarray:
    """A point of C^d: list of [re, im] pairs (a bare number is C^1)."""
    if isinstance(x, (int, float)):
        return np.array([complex(x)])
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(t, (int, float)) for t in x):
        return np.array([_complex(x)])
    return np.array([_complex(t) for t in x])


def _pairs(v):
    return [[float(np.real(c)), float(np.imag(c))] for c in np.atleast_1d(v)]


def _need(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ValidationError(f"config is missing {', '.join(missing)}")


def _model(cfg) -> PotentialModel:
    _need(cfg, "model")
    return PotentialModel.from_config(cfg["model"])


def _n(cfg) -> int:
    _need(cfg, "n")
    n = int(cfg["n"])
    if n < 1:
        raise ValidationError("n must be positive")
    return n


def _n_list(cfg):
    n_list = [int(n) for n in cfg["n_list"]]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be strictly increasing")
    return n_list


def _grid(cfg, d):
    spec = cfg.get("grid", {})
    if "pairs" in spec:
        return [(_cvec(a), _cvec(b)) for a, b in spec["pairs"]]
    return limits.default_grid(
        d,
        bound=float(spec.get("bound", 1.5)),
        step=float(spec.get("step", 0.5)),
        cap=spec.get("cap", 400),
        diagonal=bool(spec.get("diagonal", False)),
    )


def _frame(model, cfg):
    spec = cfg.get("frame", {})
    if model.is_radial:
        direction = _cvec(spec.get("direction", [[1.0, 0.0]] * model.d))
        return geometry.edge_frame(model, direction=direction)
    _need(spec, "tau")
    return geometry.edge_frame(model, tau=spec["tau"], angles=spec.get("angles"))


def _rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


# -- commands -----------------------------------------------------------------
# each returns (rows, summary)

def cmd_kernel(cfg, ctx):
    model, n = _model(cfg), _n(cfg)
    job = kernels.KernelJob.build(model, n)
    if "points" in cfg:
        z = np.array([_cvec(p[0]) for p in cfg["points"]])
        w = np.array([_cvec(p[1]) for p in cfg["points"]])
    else:
        _need(cfg, "sample")
        spec = cfg["sample"]
        rng = _rng(ctx["seed"])
        count, scale = int(spec.get("count", 50)), float(spec.get("scale", 0.5))
        shape = (count, model.d)
        z = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        w = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    lm, ph = kernels.kernel_many(job, z, w)
    brute = None
    if cfg.get("brute_force") and not model.is_radial:
        brute = [_tensor_brute_force(job, zi, wi) for zi, wi in zip(z, w)]
    rows, worst = [], 0.0
    for i in range(len(z)):
        value = complex(np.exp(lm[i] + 1j * ph[i]))
        row = {"z": _pairs(z[i]), "w": _pairs(w[i]), "log_modulus": float(lm[i]), "phase": float(ph[i]),
               "re": value.real, "im": value.imag}
        if brute is not None:
            row["rel_err_brute_force"] = abs(value - brute[i]) / abs(brute[i])
            worst = max(worst, row["rel_err_brute_force"])
        rows.append(row)
    summary = {"points": len(rows)}
    if brute is not None:
        summary["max_rel_err_brute_force"] = worst
    return rows, summary


def _tensor_brute_force(job, z, w):
    """Sum over all multi-indices with |j| < n in exact rational arithmetic.

    The points and the extended-precision values of 1/h_j are converted
    exactly, so the only rounding is in the final conversion and the
    Gaussian weight. Rounding 1/h_j to double first would already cost
    about 1e-10 where the sum cancels strongly.
    """
    import itertools
    from fractions import Fraction

    model = job.model
    inv_h = [[Fraction(*np.exp(-np.longdouble(lv)).as_integer_ratio()) for lv in t.log_values]
             for t in job.tables]
    zw = []
    for k in range(model.d):
        a, b = complex(z[k]), complex(w[k])
        c = (Fraction(a.real), Fraction(a.imag))
        e = (Fraction(b.real), -Fraction(b.imag))
        zw.append((c[0] * e[0] - c[1] * e[1], c[0] * e[1] + c[1] * e[0]))
    re, im = Fraction(0), Fraction(0)
    for idx in itertools.product(range(job.n), repeat=model.d):
        if sum(idx) >= job.n:
            continue
        tr, ti = Fraction(1), Fraction(0)
        for k, j in enumerate(idx):
            pr, pi = Fraction(1), Fraction(0)
            for _ in range(j):
                pr, pi = pr * zw[k][0] - pi * zw[k][1], pr * zw[k][1] + pi * zw[k][0]
            scale = inv_h[k][j] / math.factorial(j)
            tr, ti = (tr * pr - ti * pi) * scale, (tr * pi + ti * pr) * scale
        re += tr
        im += ti
    weight = math.exp(-job.n * float(model.Q(z) + model.Q(w)) / 2)
    return complex(float(re), float(im)) * weight


def cmd_droplet(cfg, ctx):
    model = _model(cfg)
    _need(cfg, "points")
    rows = []
    for p in cfg["points"]:
        z = _cvec(p)
        inside, margin = geometry.droplet_contains(model, z)
        rows.append({"z": _pairs(z), "inside": bool(inside), "margin": float(margin)})
    return rows, {"points": len(rows), "inside": sum(r["inside"] for r in rows)}


def _quadratic_weights(model):
    """a_k when every factor is a_k r^2, else None."""
    if model.is_radial:
        return None
    out = []
    for f in model.factors:
        if f.kind != "polynomial" or len(f.terms) != 1 or f.terms[0][0] != 2:
            return None
        out.append(f.scale * f.terms[0][1])
    return np.array(out)


def _quadratic_model(a):
    return PotentialModel.tensor([RadialProfile.polynomial([(2, float(x))]) for x in a])


def _obstacle_random_weights(cfg, ctx):
    """Fresh weights a in [low, high]^d per point, with sum a_k |z_k|^2 uniform in [s_min, s_max]."""
    spec = cfg["random_weights"]
    d = int(spec.get("d", 2))
    lo, hi = float(spec.get("low", 0.5)), float(spec.get("high", 2.0))
    s_lo, s_hi = float(spec.get("s_min", 4.0)), float(spec.get("s_max", 25.0))
    rng = _rng(ctx["seed"])
    rows, worst = [], 0.0
    for _ in range(int(spec.get("count", 200))):
        a = rng.uniform(lo, hi, d)
        u = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        s = rng.uniform(s_lo, s_hi)
        z = u * math.sqrt(s / float(np.sum(a * np.abs(u) ** 2)))
        value, tau = geometry.pluri_obstacle(_quadratic_model(a), z)
        ref = 1.0 + math.log(s)
        rows.append({"a": a.tolist(), "z": _pairs(z), "value": value, "tau": list(tau.tau),
                     "reference": ref, "deviation": abs(value - ref)})
        worst = max(worst, rows[-1]["deviation"])
    return rows, {"points": len(rows), "max_deviation": worst}


def cmd_obstacle(cfg, ctx):
    if "random_weights" in cfg:
        return _obstacle_random_weights(cfg, ctx)
    model = _model(cfg)
    if "points" in cfg:
        points = [_cvec(p) for p in cfg["points"]]
    else:
        _need(cfg, "sample")
        spec = cfg["sample"]
        rng = _rng(ctx["seed"])
        count = int(spec.get("count", 200))
        lo, hi = float(spec.get("r_min", 2.0)), float(spec.get("r_max", 5.0))
        points = []
        for _ in range(count):
            u = rng.standard_normal(model.d) + 1j * rng.standard_normal(model.d)
            points.append(u / np.linalg.norm(u) * rng.uniform(lo, hi))
    a = _quadratic_weights(model)
    rows, worst = [], 0.0
    for z in points:
        value, tau = geometry.pluri_obstacle(model, z)
        row = {"z": _pairs(z), "value": value, "tau": None if tau is None else list(tau.tau)}
        if a is not None:
            s = float(np.sum(a * np.abs(z) ** 2))
            if s >= 1:
                row["reference"] = 1.0 + math.log(s)
                row["deviation"] = abs(value - row["reference"])
                worst = max(worst, row["deviation"])
        rows.append(row)
    summary = {"points": len(rows)}
    if a is not None:
        summary["max_deviation"] = worst
    return rows, summary


def cmd_edge_limit(cfg, ctx):
    model = _model(cfg)
    frame = _frame(model, cfg)
    study = cfg.get("study", "convergence")
    if study == "steepest_decay":
        job = kernels.KernelJob.build(model, _n(cfg))
        res = limits.steepest_decay_direction(job, frame, radius=cfg.get("radius"),
                                              samples=int(cfg.get("samples", 128)), seed=ctx["seed"])
        row = {"direction": _pairs(res.direction), "angle_to_normal": res.angle_to_normal,
               "max_direction": _pairs(res.max_direction), "angle_max_to_inward": res.angle_max_to_inward}
        return [row], {"angle_to_normal": res.angle_to_normal, "angle_max_to_inward": res.angle_max_to_inward}
    mode = cfg.get("mode", "erfc_normal" if model.d == 1 else "mverfc_unitary")
    norm = cfg.get("normalization", "det")
    if mode not in limits.MODES or mode == "bulk_ginibre":
        raise ValidationError(f"edge-limit mode must be erfc_normal or mverfc_unitary, got {mode!r}")
    grid = _grid(cfg, 1 if mode == "erfc_normal" else model.d)
    if "n_list" in cfg and "n" not in ctx["overrides"]:
        report = limits.convergence_study(model, frame, mode, grid, _n_list(cfg), norm, mapper=ctx["map"])
        return report.rows, report.summary()
    job = kernels.KernelJob.build(model, _n(cfg))
    sup, rows = limits.compare_to_limit(job, frame, mode, grid, norm)
    return rows, {"model": model.key(), "mode": mode, "normalization": norm, "n": job.n,
                  "sup_error": sup, "degenerate": frame.degenerate, "grid_pairs": len(grid)}


def cmd_bulk_limit(cfg, ctx):
    model, n = _model(cfg), _n(cfg)
    _need(cfg, "z")
    frame = geometry.bulk_frame(model, _cvec(cfg["z"]))
    job = kernels.KernelJob.build(model, n)
    grid = _grid(cfg, model.d)
    sup, rows = limits.compare_to_limit(job, frame, "bulk_ginibre", grid)
    return rows, {"model": model.key(), "n": n, "sup_error": sup, "grid_pairs": len(grid)}


def cmd_partial_kernel(cfg, ctx):
    n = _n(cfg)
    method = cfg.get("method", "radial")
    samples = int(cfg.get("samples", 64))
    if method == "radial":
        _need(cfg, "profile")
        profile = RadialProfile.from_config(cfg["profile"])
        m = int(cfg.get("m", math.ceil(math.sqrt(n) * math.log(n))))
        c = float(cfg.get("safety", 0.9))
        r = np.linspace(0.0, c * math.sqrt(m), samples)
        vals = kernels.normalized_partial_kernel(profile, n, m, r)
        dev = np.abs(vals - 1.0)
        rows = [{"abs_z": float(a), "value": float(v), "deviation": float(e)} for a, v, e in zip(r, vals, dev)]
        return rows, {"n": n, "m": m, "sup_deviation": float(dev.max()),
                      "constant": float(dev.max() * n / m)}
    if method == "gram_vs_extremal":
        _need(cfg, "Q", "m")
        Q = quad.PlanarPolynomial.from_config(cfg["Q"]).validate()
        m = int(cfg["m"])
        rng = _rng(ctx["seed"])
        rad = float(cfg.get("radius", 0.2))
        pts = np.sqrt(rng.uniform(0, 1, samples)) * rad * np.exp(2j * np.pi * rng.uniform(0, 1, samples))
        basis = kernels.gram_basis(Q, n, m)
        rows = []
        for z in pts:
            gram = kernels.gram_partial_kernel(Q, n, m, z, z, weighted=False, basis=basis)
            ext = kernels.extremal_partial_kernel(Q, n, m, z)
            # the extremal formula is normalized so that its value at 0 is 1
            log_gram = gram.log_modulus + basis.log_diag[0]
            dev = abs(math.exp(ext.log_value - log_gram) - 1.0)
            rows.append({"z": _pairs(z), "gram": math.exp(log_gram),
                         "extremal": math.exp(ext.log_value), "rel_dev": dev})
        worst = max(r["rel_dev"] for r in rows)
        return rows, {"n": n, "m": m, "max_rel_dev": worst, "ratio_to_m_over_n": worst * n / m}
    raise ValidationError(f"unknown partial-kernel method {method!r}")


def _norm_sweep(cfg):
    spec = cfg["sweep"]
    _need(spec, "n", "d", "profiles")
    rows = []
    for prof_cfg in spec["profiles"]:
        profile = RadialProfile.from_config(prof_cfg)
        for n in spec["n"]:
            for d in spec["d"]:
                n, d = int(n), int(d)
                j = np.arange(int(spec.get("j_factor", 2)) * n + 1)
                log_h = quad.radial_norms(profile, n, d, j)
                ref = quad.monomial_norms_closed_form(profile, n, d, j)
                err = np.abs(np.expm1(log_h - ref))
                rows.append({"profile": profile.to_dict(), "n": n, "d": d, "j_max": int(j[-1]),
                             "max_rel_err": float(err.max())})
    return rows, {"combinations": len(rows), "max_rel_err": max(r["max_rel_err"] for r in rows)}


def cmd_moments(cfg, ctx):
    if "sweep" in cfg:
        return _norm_sweep(cfg)
    n = _n(cfg)
    if "model" in cfg:
        # radial norms h_j with closed forms where available
        model = _model(cfg)
        if not model.is_radial:
            raise ValidationError("radial norms need a radial model")
        j = np.arange(int(cfg.get("j_max", 2 * n)) + 1)
        log_h = quad.radial_norms(model.profile, n, model.d, j)
        try:
            ref = quad.monomial_norms_closed_form(model.profile, n, model.d, j)
        except ValidationError:
            ref = None
        rows = []
        for i in range(j.size):
            row = {"j": int(j[i]), "log_h": float(log_h[i])}
            if ref is not None:
                row["closed_form"] = float(ref[i])
                row["rel_err"] = float(abs(math.expm1(log_h[i] - ref[i])))
            rows.append(row)
        summary = {"n": n, "d": model.d, "count": len(rows)}
        if ref is not None:
            summary["max_rel_err"] = max(r["rel_err"] for r in rows)
        return rows, summary
    _need(cfg, "Q", "m")
    Q = quad.PlanarPolynomial.from_config(cfg["Q"]).validate()
    m = int(cfg["m"])
    log_mod, phase = quad.moment_matrix(Q, n, m)
    lap = Q.laplacian_at_zero()
    rows, fitted = [], 0.0
    for j in range(m + 1):
        for k in range(m + 1):
            lo = min(j, k)
            ratio = math.exp(log_mod[j, k] - log_mod[lo, lo])
            row = {"j": j, "k": k, "log_modulus": float(log_mod[j, k]), "phase": float(phase[j, k]),
                   "ratio": ratio}
            if j != k and ratio > 0:
                # smallest C with ratio <= (C (j+k) / (2 n dQ(0)))^{|j-k|}
                need = ratio ** (1.0 / abs(j - k)) * 2 * n * lap / (j + k)
                row["needed_constant"] = need
                fitted = max(fitted, need)
            rows.append(row)
    return rows, {"n": n, "m": m, "fitted_constant": fitted}


def cmd_variance(cfg, ctx):
    model, n = _model(cfg), _n(cfg)
    methods = cfg.get("methods", ["bernoulli_exact", "annulus_integral"])
    if "a" in cfg:
        setups = [("a", float(cfg["a"]), stats.CountingSetup(model, n, a=float(cfg["a"])))]
    else:
        deltas = cfg.get("deltas", [cfg.get("delta", 0.0)])
        setups = [("delta", float(x), stats.CountingSetup(model, n, delta=float(x))) for x in deltas]
    factor = cfg.get("angular_factor", "sphere")
    scale = n ** (model.d - 1) * math.sqrt(n)
    rows = []
    for label, x, setup in setups:
        limit = stats.edge_variance_limit(model, delta=x, angular_factor=factor) if label == "delta" else None
        for method in methods:
            if method == "bernoulli_exact":
                res = stats.variance_bernoulli(setup)
            elif method == "annulus_integral":
                res = stats.variance_integral(setup, float(cfg.get("annulus_factor", stats.ANNULUS_FACTOR)))
            elif method == "monte_carlo":
                res = stats.mc_count(setup, int(cfg.get("trials", 100_000)), seed=ctx["seed"],
                                     threads=ctx["threads"])
            else:
                raise ValidationError(f"unknown variance method {method!r}")
            rows.append({"n": n, "d": model.d, label: x, "method": method, "mean": res.mean,
                         "variance": res.variance, "limit_value": limit,
                         "ratio": None if limit is None else res.variance / scale / limit})
    summary = {"n": n, "d": model.d, "angular_factor": factor, "rows": len(rows)}
    exact = [r for r in rows if r["method"] == "bernoulli_exact"]
    if exact and exact[0]["ratio"] is not None:
        summary["max_rel_dev_from_limit"] = max(abs(r["ratio"] - 1.0) for r in exact)
    for other in ("annulus_integral", "monte_carlo"):
        pairs = [(a["variance"], b["variance"]) for a in exact for b in rows
                 if b["method"] == other and b.get(label) == a.get(label)]
        if pairs:
            summary[f"max_rel_diff_{other}"] = max(abs(v / e - 1.0) for e, v in pairs if e > 0)
    return rows, summary


def cmd_identity_check(cfg, ctx):
    kind = cfg.get("kind", "halfspace")
    rng = _rng(ctx["seed"])
    if kind == "reproducing":
        d = int(cfg.get("d", 2))
        v = np.full(d, 1 / math.sqrt(d))
        rows = []
        for _ in range(int(cfg.get("pairs", 10))):
            xi = 0.5 * (rng.standard_normal(d) + 1j * rng.standard_normal(d))
            eta = 0.5 * (rng.standard_normal(d) + 1j * rng.standard_normal(d))
            pairing, target = limits.reproducing_pairing(xi, eta, v)
            rows.append({"xi": _pairs(xi), "eta": _pairs(eta), "pairing_re": pairing.real,
                         "pairing_im": pairing.imag, "target_re": target.real, "target_im": target.imag,
                         "rel_err": abs(pairing - target) / abs(target)})
        worst = max(r["rel_err"] for r in rows)
        return rows, {"kind": kind, "max_rel_err": worst, "status": "PASS" if worst <= 0.02 else "FAIL"}
    if kind != "halfspace":
        raise ValidationError(f"unknown identity-check kind {kind!r}")
    d = int(cfg.get("d", 3))
    samples = int(cfg.get("samples", 1_000_000))
    sigmas = float(cfg.get("sigmas", 3.0))
    rows = []
    for case in range(int(cfg.get("cases", 5))):
        M = rng.standard_normal((d, d))
        A = M @ M.T + np.eye(d)
        v = rng.standard_normal(d)
        b = 0.3 * rng.standard_normal(d)
        exact = specfun.halfspace_gaussian(A, v, b)
        est, se = specfun.halfspace_gaussian_mc(A, v, b, samples, seed=int(rng.integers(2 ** 63)))
        # b = 0: half of the full Gaussian integral
        zero = specfun.halfspace_gaussian(A, v, np.zeros(d))
        half = 0.5 * (2 * math.pi) ** (d / 2) * math.sqrt(np.linalg.det(A))
        rows.append({"case": case, "closed_form": exact, "monte_carlo": est, "stderr": se,
                     "z_score": (est - exact) / se, "b0_rel_err": abs(zero / half - 1.0)})
    ok = all(abs(r["z_score"]) <= sigmas for r in rows) and all(r["b0_rel_err"] <= 1e-12 for r in rows)
    return rows, {"kind": kind, "d": d, "samples": samples, "status": "PASS" if ok else "FAIL"}


HANDLERS = {
    "kernel": cmd_kernel,
    "droplet": cmd_droplet,
    "obstacle": cmd_obstacle,
    "edge-limit": cmd_edge_limit,
    "bulk-limit": cmd_bulk_limit,
    "partial-kernel": cmd_partial_kernel,
    "moments": cmd_moments,
    "variance": cmd_variance,
    "identity-check": cmd_identity_check,
}


# -- output -------------------------------------------------------------------

def _plain(x):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _cell(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    columns = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(k)) for k in columns])
    return buf.getvalue()


def envelope(command, config, rows, summary) -> dict:
    return _plain({"schema": SCHEMA, "command": command, "config": config, "rows": rows, "summary": summary})


def emit_report(command, config, rows, summary, out=None, fmt="json", stream=None):
    """Write the report; returns the list of paths written."""
    doc = envelope(command, config, rows, summary)
    stream = sys.stdout if stream is None else stream
    if fmt == "json":
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        if out is None:
            stream.write(text)
            return []
        _write(Path(out), text)
        return [Path(out)]
    if fmt != "csv":
        raise ValidationError(f"unknown format {fmt!r}")
    text = rows_to_csv(doc["rows"])
    side = {k: doc[k] for k in ("schema", "command", "config", "summary")}
    side_text = json.dumps(side, indent=2, sort_keys=True) + "\n"
    if out is None:
        stream.write(text)
        return []
    out = Path(out)
    side_path = out.with_name(out.stem + ".summary.json")
    _write(out, text)
    _write(side_path, side_text)
    return [out, side_path]


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc.strerror or exc}") from exc


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bergkern", description="Bergman kernel numerics on C^d.")
    p.add_argument("command", help=f"one of: {', '.join(COMMANDS)}")
    p.add_argument("--config", help="JSON config document")
    p.add_argument("--n", type=int, help="override n")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", default=None, help="worker threads, or 'auto'")
    p.add_argument("--seed", type=int, default=None)
    return p


def resolve_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object")
    cfg.pop("command", None)
    if args.n is not None:
        cfg["n"] = args.n
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    if args.threads is not None:
        cfg["threads"] = args.threads
    cfg.setdefault("threads", 1)
    if args.format is not None:
        cfg["format"] = args.format
    cfg.setdefault("format", "json")
    return cfg


def _threads(value) -> int:
    if value == "auto":
        return os.cpu_count() or 1
    try:
        t = int(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"threads must be a positive integer or 'auto', got {value!r}") from exc
    if t < 1:
        raise ValidationError("threads must be positive")
    return t


def run(command, cfg, overrides=()):
    """Run one command on a resolved config; returns (rows, summary)."""
    if command not in HANDLERS:
        raise ValidationError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    threads = _threads(cfg.get("threads", 1))
    ctx = {"seed": int(cfg.get("seed", 0)), "threads": threads, "overrides": set(overrides), "map": map}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ctx["map"] = pool.map
            return HANDLERS[command](cfg, ctx)
    return HANDLERS[command](cfg, ctx)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        overrides = {"n"} if args.n is not None else set()
        rows, summary = run(args.command, cfg, overrides)
        emit_report(args.command, cfg, rows, summary, args.out, cfg["format"])
    except BergkernError as exc:
        record = {"schema": SCHEMA, "command": args.command, "error": type(exc).__name__,
                  "message": str(exc), "exit_code": exc.exit_code}
        if hasattr(exc, "usable_degree"):
            record["usable_degree"] = exc.usable_degree
        sys.stderr.write(json.dumps(record) + "\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
