"""Command line front end: validated JSON configs in, CSV tables and JSON summaries out.

Each subcommand reads the shared problem data (lattice, potential,
perturbation) plus its own parameter section from one config file, runs the
corresponding module, and writes CSV rows for plotting plus a JSON summary.
All sampling is fixed-seed and reductions are ordered, so outputs are
byte-identical across reruns (wall_time_s in the summary is the one
exception, it is timing).

Exit codes: 0 success, 2 config errors (nothing written), 3 numerical module
errors (summary JSON written with the error name).
"""

import argparse
import io
import json
import os
import sys
import time

import jsonschema
import numpy as np

from gapeig import augment, bloch, fem1d, model, supercell
from gapeig.errors import ConfigError, GapeigError

_WINDOW = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        {"type": "string"},
    ]
}
_WAVEVECTOR = {
    "oneOf": [
        {"type": "integer"},
        {"type": "array", "items": {"type": "integer"}, "minItems": 1, "maxItems": 2},
    ]
}
_INT_OR_LIST = {
    "oneOf": [
        {"type": "integer"},
        {"type": "array", "items": {"type": "integer"}, "minItems": 1},
    ]
}
_NUM_OR_LIST = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
    ]
}
_REFERENCE = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}},
        {
            "type": "object",
            "properties": {
                "L": {"type": "integer", "minimum": 1},
                "ratio": {"type": "number", "minimum": 4},
            },
            "required": ["L"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "type": "object",
    "properties": {
        "lattice": {
            "type": "object",
            "properties": {
                "d": {"enum": [1, 2]},
                "b": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["d", "b"],
            "additionalProperties": False,
        },
        "potential": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "amplitude": {"type": "number"},
                    "kind": {"enum": ["cos", "sin"]},
                    "wavevector": _WAVEVECTOR,
                    "phase": {"type": "number"},
                },
                "required": ["amplitude", "kind", "wavevector"],
                "additionalProperties": False,
            },
        },
        "perturbation": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "coefficient": {"type": "number"},
                    "factors": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "prefixItems": [{"type": "number"}, {"type": "integer", "minimum": 0}],
                            "minItems": 2,
                            "maxItems": 2,
                        },
                        "minItems": 1,
                        "maxItems": 2,
                    },
                    "center": {"type": "array", "items": {"type": "number"}},
                    "sigma": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["coefficient", "factors"],
                "additionalProperties": False,
            },
        },
        "threads": {"type": "integer", "minimum": 1},
        "bands": {
            "type": "object",
            "properties": {
                "M_pw": {"type": "integer", "minimum": 1},
                "M_q": {"type": "integer", "minimum": 2, "multipleOf": 2},
                "J_max": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "gap": {
            "type": "object",
            "properties": {
                "J": {"type": "integer", "minimum": 1},
                "M_pw": {"type": "integer", "minimum": 1},
                "M_q": {"type": "integer", "minimum": 2, "multipleOf": 2},
                "J_max": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "supercell": {
            "type": "object",
            "properties": {
                "window": _WINDOW,
                "L": _INT_OR_LIST,
                "ratio": {"type": "number", "minimum": 4},
                "t": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "method": {"enum": ["auto", "dense", "iterative"]},
                "k": {"type": "integer", "minimum": 1},
                "max_planewaves": {"type": "integer", "minimum": 1},
            },
            "required": ["window", "L"],
            "additionalProperties": False,
        },
        "galerkin": {
            "type": "object",
            "properties": {
                "window": _WINDOW,
                "n_c": {"type": "integer", "minimum": 2},
                "n_half": _INT_OR_LIST,
                "t": {"type": "number", "minimum": 0},
                "reference": _REFERENCE,
                "match_tol": {"type": "number", "exclusiveMinimum": 0},
                "edge_guard": {"type": "number", "minimum": 0},
            },
            "required": ["window", "n_half"],
            "additionalProperties": False,
        },
        "dislocation": {
            "type": "object",
            "properties": {
                "window": _WINDOW,
                "kind": {
                    "oneOf": [
                        {"enum": ["halfline+", "halfline-", "junction"]},
                        {
                            "type": "array",
                            "items": {"enum": ["halfline+", "halfline-", "junction"]},
                            "minItems": 1,
                        },
                    ]
                },
                "t": _NUM_OR_LIST,
                "n_periods": {"type": "integer", "minimum": 20},
                "n_c": {"type": "integer", "minimum": 2},
            },
            "required": ["window", "kind", "t"],
            "additionalProperties": False,
        },
        "augment": {
            "type": "object",
            "properties": {
                "window": _WINDOW,
                "J": {"type": "integer", "minimum": 1},
                "n_c": {"type": "integer", "minimum": 2},
                "M_q": {"type": "integer", "minimum": 4, "multipleOf": 2},
                "L": _INT_OR_LIST,
                "t": _NUM_OR_LIST,
                "svd_tol": {"type": "number", "exclusiveMinimum": 0},
                "window_margin": {"type": "number", "minimum": 0},
                "reference": _REFERENCE,
            },
            "required": ["window", "L"],
            "additionalProperties": False,
        },
        "pollution-scan": {
            "type": "object",
            "properties": {
                "window": _WINDOW,
                "n_c": {"type": "integer", "minimum": 2},
                "n_half": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "t": {"type": "number", "minimum": 0},
                "reference": _REFERENCE,
                "match_tol": {"type": "number", "exclusiveMinimum": 0},
                "edge_guard": {"type": "number", "minimum": 0},
            },
            "required": ["window", "n_half", "reference"],
            "additionalProperties": False,
        },
    },
    "required": ["lattice"],
    "additionalProperties": False,
}

METHODS = ("bands", "gap", "supercell", "galerkin", "dislocation", "augment", "pollution-scan")


def load_config(path):
    try:
        with open(path) as f:
            cfg = json.load(f)
    except OSError as e:
        raise ConfigError("cannot read config: %s" % e) from None
    except json.JSONDecodeError as e:
        raise ConfigError("malformed JSON in %s: %s" % (path, e)) from None
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as e:
        loc = "/".join(str(p) for p in e.absolute_path) or "<top>"
        raise ConfigError("config invalid at %s: %s" % (loc, e.message)) from None
    return cfg


def build_problem(cfg):
    lat = model.Lattice(cfg["lattice"]["d"], cfg["lattice"]["b"])
    vterms = [
        (t["amplitude"], t["kind"], t["wavevector"], t.get("phase", 0.0))
        for t in cfg.get("potential", [])
    ]
    V = model.PeriodicPotential(lat, vterms)
    wterms = [
        {
            "coefficient": t["coefficient"],
            "factors": [tuple(f) for f in t["factors"]],
            "center": tuple(t.get("center", (0.0,) * lat.d)),
            "sigma": t.get("sigma", 1.0),
        }
        for t in cfg.get("perturbation", [])
    ]
    W = model.Perturbation(lat, wterms)
    return lat, V, W


def resolve_window(entry, out_dir):
    """Explicit [alpha, beta] or the path of a gap JSON written previously."""
    if isinstance(entry, (list, tuple)):
        a, b = float(entry[0]), float(entry[1])
        if not a < b:
            raise ConfigError("window must satisfy alpha < beta")
        return a, b
    path = entry if os.path.isabs(entry) else os.path.join(out_dir, entry)
    if not os.path.exists(path):
        raise ConfigError(
            "window file %s not found; run the gap subcommand first or give an explicit window"
            % path
        )
    with open(path) as f:
        g = json.load(f)
    try:
        return float(g["alpha"]), float(g["beta"])
    except (KeyError, TypeError):
        raise ConfigError("window file %s lacks alpha/beta fields" % path) from None


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    return x


def _atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def write_json(path, obj):
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    _atomic_write(path, buf.getvalue())


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _reference_values(ref, V, W, window, max_planewaves=supercell.MAX_PLANEWAVES):
    if isinstance(ref, (list, tuple)):
        return np.asarray(ref, dtype=float)
    L = int(ref["L"])
    N = int(round(ref.get("ratio", 16) * L))
    res = supercell.supercell_spectrum(V, W, L, N, window, max_planewaves=max_planewaves)
    return res.interior()


def run_bands(cfg, out_dir, threads):
    lat, V, _ = build_problem(cfg)
    p = cfg.get("bands", {})
    bs = bloch.band_structure(
        V, M_pw=p.get("M_pw"), M_q=p.get("M_q"), J_max=p.get("J_max", 4), threads=threads
    )
    header = ["q1", "band", "epsilon"] if lat.d == 1 else ["q1", "q2", "band", "epsilon"]
    rows = []
    for i in range(len(bs.qpoints)):
        for j in range(bs.J_max):
            rows.append(tuple(bs.qpoints[i]) + (j + 1, bs.bands[i, j]))
    write_csv(os.path.join(out_dir, "bands.csv"), header, rows)
    results = {
        "M_pw": bs.M_pw,
        "M_q": bs.M_q,
        "J_max": bs.J_max,
        "band_ranges": [bs.band_range(j + 1) for j in range(bs.J_max)],
    }
    return results, {"n_qpoints": len(bs.qpoints)}, ["bands.csv"]


def run_gap(cfg, out_dir, threads):
    _, V, _ = build_problem(cfg)
    p = cfg.get("gap", {})
    bs = bloch.band_structure(
        V, M_pw=p.get("M_pw"), M_q=p.get("M_q"), J_max=p.get("J_max", 4), threads=threads
    )
    gw = bloch.find_gap(bs, p.get("J", 1))
    out = {
        "J": gw.J,
        "alpha": gw.alpha,
        "beta": gw.beta,
        "gamma": gw.gamma,
        "M_pw": bs.M_pw,
        "M_q": bs.M_q,
    }
    write_json(os.path.join(out_dir, "gap.json"), out)
    results = dict(out)
    results["component_bands"] = gw.info.get("component_bands")
    return results, {"band_ranges": gw.info.get("band_ranges")}, ["gap.json"]


def run_supercell(cfg, out_dir, threads):
    _, V, W = build_problem(cfg)
    p = cfg["supercell"]
    window = resolve_window(p["window"], out_dir)
    mp = p.get("max_planewaves", supercell.MAX_PLANEWAVES)
    Ls = _as_list(p["L"])
    ratio = p.get("ratio", 16)
    t = p.get("t", 0.0)
    rows = []
    results = {"window": list(window), "runs": []}
    diag = {}
    if len(Ls) > 1:
        scan = supercell.convergence_scan(V, W, Ls, ratio, window, max_planewaves=mp)
        for row in scan:
            for ev in row["eigenvalues"]:
                cls = "interior" if ev in row["interior"] else "edge"
                rows.append((row["L"], row["N"], 0.0, ev, cls))
            results["runs"].append(
                {
                    "L": row["L"],
                    "N": row["N"],
                    "eigenvalues": row["eigenvalues"],
                    "interior": row["interior"],
                    "delta_prev": row["delta_prev"],
                }
            )
            diag = row["diagnostics"]
    else:
        L = Ls[0]
        N = int(round(ratio * L))
        if t > 0:
            res = supercell.mismatched_supercell_spectrum(V, W, L, t, N, window, max_planewaves=mp)
        else:
            res = supercell.supercell_spectrum(
                V, W, L, N, window, method=p.get("method", "auto"), k=p.get("k", 10),
                max_planewaves=mp,
            )
        interior = res.interior()
        for ev in res.eigenvalues:
            cls = "interior" if ev in interior else "edge"
            rows.append((L, N, t, ev, cls))
        results["runs"].append(
            {"L": L, "N": N, "t": t, "eigenvalues": res.eigenvalues, "interior": interior}
        )
        diag = res.diagnostics
    write_csv(
        os.path.join(out_dir, "supercell.csv"),
        ["L", "N", "t", "eigenvalue", "class"],
        rows,
    )
    return results, diag, ["supercell.csv"]


def _galerkin_rows(V, W, lat, p, window, rows, results):
    n_c = p.get("n_c", 100)
    t = p.get("t", 0.0)
    ref = _reference_values(p["reference"], V, W, window) if "reference" in p else None
    for n_half in _as_list(p["n_half"]):
        mesh = fem1d.symmetric_mesh(lat, n_c, n_half, t)
        res = fem1d.galerkin_spectrum(V, W, mesh, window)
        if ref is not None:
            reports = fem1d.classify_modes(
                mesh,
                res,
                ref,
                match_tol=p.get("match_tol", fem1d.MATCH_TOL),
                edge_guard_frac=p.get("edge_guard", supercell.DEFAULT_EDGE_GUARD),
            )
        else:
            guard = p.get("edge_guard", supercell.DEFAULT_EDGE_GUARD) * (window[1] - window[0])
            reports = [
                fem1d.LocalizationReport(
                    ev,
                    fem1d.boundary_mass(mesh, res.eigenvectors[:, i]),
                    fem1d.compact_mass(mesh, res.eigenvectors[:, i]),
                    "undetermined"
                    if ev <= window[0] + guard or ev >= window[1] - guard
                    else "interior",
                )
                for i, ev in enumerate(res.eigenvalues)
            ]
        for r in reports:
            rows.append(
                (n_half, t, n_c, mesh.h, r.eigenvalue, r.mu_boundary, r.mu_compact, r.classification)
            )
        results["runs"].append(
            {
                "n_half": n_half,
                "t": t,
                "eigenvalues": res.eigenvalues,
                "classes": [r.classification for r in reports],
            }
        )
    return ref


def run_galerkin(cfg, out_dir, threads):
    lat, V, W = build_problem(cfg)
    p = cfg["galerkin"]
    window = resolve_window(p["window"], out_dir)
    rows = []
    results = {"window": list(window), "runs": []}
    ref = _galerkin_rows(V, W, lat, p, window, rows, results)
    write_csv(
        os.path.join(out_dir, "galerkin.csv"),
        ["n_half", "t", "n_c", "h", "eigenvalue", "mu_boundary", "mu_compact", "class"],
        rows,
    )
    diag = {"reference": ref}
    return results, diag, ["galerkin.csv"]


def run_pollution_scan(cfg, out_dir, threads):
    lat, V, W = build_problem(cfg)
    p = cfg["pollution-scan"]
    window = resolve_window(p["window"], out_dir)
    rows = []
    results = {"window": list(window), "runs": []}
    ref = _galerkin_rows(V, W, lat, p, window, rows, results)
    spurious = [r[4] for r in rows if r[7] == "spurious"]
    results["n_runs"] = len(results["runs"])
    results["runs_with_spurious"] = sum(
        1 for run in results["runs"] if "spurious" in run["classes"]
    )
    results["spurious_eigenvalues"] = spurious
    write_csv(
        os.path.join(out_dir, "pollution.csv"),
        ["n_half", "t", "n_c", "h", "eigenvalue", "mu_boundary", "mu_compact", "class"],
        rows,
    )
    return results, {"reference": ref}, ["pollution.csv"]


def run_dislocation(cfg, out_dir, threads):
    _, V, _ = build_problem(cfg)
    p = cfg["dislocation"]
    window = resolve_window(p["window"], out_dir)
    n_periods = p.get("n_periods", 40)
    n_c = p.get("n_c", 100)
    rows = []
    results = {"window": list(window), "runs": []}
    for kind in _as_list(p["kind"]):
        for t in _as_list(p["t"]):
            res = fem1d.dislocation_spectrum(
                V, kind, t, window, n_periods=n_periods, n_c=n_c
            )
            for ev in res.eigenvalues:
                rows.append((kind, t, n_periods, n_c, ev))
            results["runs"].append({"kind": kind, "t": t, "eigenvalues": res.eigenvalues})
    write_csv(
        os.path.join(out_dir, "dislocation.csv"),
        ["kind", "t", "n_periods", "n_c", "eigenvalue"],
        rows,
    )
    return results, {"n_periods": n_periods, "n_c": n_c}, ["dislocation.csv"]


def _window_line_mass(aug, coeffs, lo, hi):
    """Mass of an augmented eigenfunction on [lo, hi] in window coordinates."""
    P = aug.projector
    full = np.zeros(P.n_win)
    nf = len(aug.idx)
    full[aug.idx] = coeffs[:nf]
    if aug.n_aug:
        full += aug.U_keep @ coeffs[nf:]
    line = fem1d.Mesh1D(P.lattice.b, P.n_c, -P.half_index, P.half_index)
    vals = np.concatenate([full, [-full[0]]])
    return fem1d.interval_mass(line, vals, lo, hi, interior=False)


def run_augment(cfg, out_dir, threads):
    lat, V, W = build_problem(cfg)
    p = cfg["augment"]
    window = resolve_window(p["window"], out_dir)
    J = p.get("J", 1)
    n_c = p.get("n_c", 100)
    M_q = p.get("M_q", 64)
    P = augment.build_projector(V, J=J, n_c=n_c, M_q=M_q)
    ref = _reference_values(p["reference"], V, W, window) if "reference" in p else None
    guard = supercell.DEFAULT_EDGE_GUARD * (window[1] - window[0])
    rows = []
    results = {"window": list(window), "runs": []}
    first_mesh = None
    for L in _as_list(p["L"]):
        if L % 2:
            raise ConfigError("augment L values must be even (domain is L periods, symmetric)")
        for t in _as_list(p.get("t", 0.0)):
            mesh = fem1d.symmetric_mesh(lat, n_c, L // 2, t)
            if first_mesh is None:
                first_mesh = mesh
            aug = augment.augmented_space(
                P,
                mesh,
                sigma_tol=p.get("svd_tol", augment.DEFAULT_SIGMA_TOL),
                min_margin=p.get("window_margin", 1.0),
            )
            res = augment.augmented_spectrum(V, W, aug, window, with_vectors=True)
            for i, ev in enumerate(res.eigenvalues):
                c = res.eigenvectors[:, i]
                mb = _window_line_mass(aug, c, mesh.x_lo, mesh.x_lo + 2 * lat.b) + _window_line_mass(
                    aug, c, mesh.x_hi - 2 * lat.b, mesh.x_hi
                )
                mk = _window_line_mass(aug, c, -2 * lat.b, 2 * lat.b)
                if ev <= window[0] + guard or ev >= window[1] - guard:
                    cls = "undetermined"
                elif ref is None:
                    cls = "interior"
                elif len(ref) and np.min(np.abs(ref - ev)) <= p.get("match_tol", fem1d.MATCH_TOL):
                    cls = "true"
                else:
                    cls = "spurious"
                rows.append((L, t, n_c, M_q, ev, mb, mk, cls))
            results["runs"].append(
                {
                    "L": L,
                    "t": t,
                    "eigenvalues": res.eigenvalues,
                    "interior": res.interior(),
                    "n_aug": aug.n_aug,
                }
            )
    a2 = augment.a2_estimate(V, first_mesh, J=J, M_q=M_q)
    report = {
        "idempotency_residual": P.diagnostics["idempotency_residual"],
        "kernel_decay": P.diagnostics["decay_at_6_periods"],
        "a2_estimate": a2["estimate"],
        "trace_per_cell": P.diagnostics["trace_per_cell"],
        "translation_defect": P.diagnostics["translation_defect"],
    }
    write_json(os.path.join(out_dir, "augment_report.json"), report)
    write_csv(
        os.path.join(out_dir, "augment.csv"),
        ["L", "t", "n_c", "M_q", "eigenvalue", "mu_boundary", "mu_compact", "class"],
        rows,
    )
    results["projector_report"] = report
    return results, dict(P.diagnostics), ["augment.csv", "augment_report.json"]


RUNNERS = {
    "bands": run_bands,
    "gap": run_gap,
    "supercell": run_supercell,
    "galerkin": run_galerkin,
    "dislocation": run_dislocation,
    "augment": run_augment,
    "pollution-scan": run_pollution_scan,
}


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="gapeig",
        description="Gap eigenvalues of perturbed periodic Schrodinger operators",
    )
    ap.add_argument("method", choices=METHODS)
    ap.add_argument("--config", required=True, help="JSON experiment description")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--threads", type=int, default=None, help="worker threads for fiber sweeps")
    args = ap.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.method not in ("bands", "gap") and args.method not in cfg:
            raise ConfigError("config has no '%s' section" % args.method)
        os.makedirs(args.out, exist_ok=True)
        threads = args.threads or cfg.get("threads", 1)
    except ConfigError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 2

    summary_path = os.path.join(args.out, "summary.json")
    t0 = time.perf_counter()
    try:
        results, diagnostics, files = RUNNERS[args.method](cfg, args.out, threads)
    except ConfigError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 2
    except GapeigError as e:
        write_json(
            summary_path,
            {
                "method": args.method,
                "params": cfg.get(args.method, {}),
                "error": type(e).__name__,
                "message": str(e),
                "wall_time_s": time.perf_counter() - t0,
            },
        )
        print("numerical error: %s: %s" % (type(e).__name__, e), file=sys.stderr)
        return 3
    write_json(
        summary_path,
        {
            "method": args.method,
            "params": cfg.get(args.method, {}),
            "results": results,
            "diagnostics": diagnostics,
            "wall_time_s": time.perf_counter() - t0,
            "files": files,
        },
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
