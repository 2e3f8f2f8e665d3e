"""Batch driver: wire configs to the computational modules, emit reports.

Commands: check, certify, rays, corner, carleman, all, run (the last reads
the command from the config file's [run] section).  Each run writes a
``report.json`` (schema "ucp-report/1") plus CSV data files into the output
directory, atomically (temp file + rename).  Exit status: 0 when every check
passed, 1 when a check failed, 2 on config/usage errors.  Identical config
and seed produce byte-identical reports: no timestamps are recorded and all
collections are emitted in sorted order.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import re
import sys
from typing import Optional

import numpy as np

from . import __version__
from .carleman import build_weight, exponent_slopes, lambda_sweep
from .certify import certify
from .corner import (BMatrixField, SampledField, corner_corpus, detect_layer,
                     kink_profile_corpus, mollifier_commutator,
                     verify_extension_identities, verify_inequality_transfer)
from .errors import ContractViolation, UccertError
from .expressions import expression_field
from .fields import PhasePoint, constant_metric, linear_combination, squared_field
from .grids import bump_corpus, bump_superposition_values, make_grid, unit_box
from .hypotheses import (GeometrySpec, build_psi, check_assumptions,
                         verify_split_signs, verify_sublevel_inclusion)
from .models import ModelSpec, bumpy_wave_metric, carleman_section, get_model
from .rays import contact, integrate

SCHEMA = "ucp-report/1"

# weak-identity residual bounds: K * h^2, K fitted once per family on the
# analytic corpus with headroom
WEAK_K = {"first": 0.4, "mixed_pair": 1.5, "edge": 0.3, "interior": 30.0}


def _write_atomic(path: str, data: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(data)
    os.replace(tmp, path)


def _np_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_report(out_dir: str, payload: dict):
    payload = {"schema": SCHEMA, "version": __version__, **payload}
    _write_atomic(os.path.join(out_dir, "report.json"),
                  json.dumps(payload, indent=2, sort_keys=True, default=_np_default) + "\n")


def write_csv(out_dir: str, name: str, header: list, rows: list):
    os.makedirs(out_dir, exist_ok=True)
    tmp = os.path.join(out_dir, name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header)
        for r in rows:
            w.writerow(r)
    os.replace(tmp, os.path.join(out_dir, name))


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def parse_config_file(path: str) -> dict:
    """Line-oriented key=value format with [section] headers."""
    sections: dict = {}
    current = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"\[([A-Za-z_][A-Za-z_0-9-]*)\]", line)
            if m:
                current = m.group(1)
                sections.setdefault(current, {})
                continue
            if "=" not in line or current is None:
                raise ContractViolation(f"{path}:{lineno}: expected key = value inside a section")
            key, val = line.split("=", 1)
            sections[current][key.strip()] = val.strip()
    return sections


def parse_metric(text: str, dim: int):
    text = text.strip()
    m = re.fullmatch(r"diag\(([^)]*)\)", text)
    if m:
        vals = [float(v) for v in m.group(1).split(",")]
        if len(vals) != dim:
            raise ContractViolation(f"diag() entry count {len(vals)} != dim {dim}")
        return constant_metric(np.diag(vals), name=text)
    m = re.fullmatch(r"wave\((\d+)\)", text)
    if m:
        d = int(m.group(1))
        if d + 1 != dim:
            raise ContractViolation(f"wave({d}) has dimension {d + 1}, config says {dim}")
        return constant_metric(np.diag([-1.0] + [1.0] * d), name=text)
    m = re.fullmatch(r"bumpy_wave\((\d+)\s*,\s*([0-9.eE+-]+)\)", text)
    if m:
        d = int(m.group(1))
        if d + 1 != dim:
            raise ContractViolation(f"bumpy_wave({d},..) has dimension {d + 1}, config says {dim}")
        return bumpy_wave_metric(d, amp=float(m.group(2)))
    if text.startswith("["):
        mat = np.asarray(json.loads(text), dtype=float)
        if mat.shape != (dim, dim):
            raise ContractViolation(f"matrix shape {mat.shape} != ({dim},{dim})")
        return constant_metric(mat, name="matrix")
    raise ContractViolation(f"cannot parse metric {text!r}")


def geometry_from_config(geo: dict) -> ModelSpec:
    try:
        dim = int(geo["dim"])
        metric = parse_metric(geo["metric"], dim)
        phi_plus = expression_field(geo["phi_plus"], dim, name="phi_plus")
        phi_minus = expression_field(geo["phi_minus"], dim, name="phi_minus")
        box_parts = [p.strip() for p in geo["box"].split(",")]
        if len(box_parts) != dim:
            raise ContractViolation(f"box needs {dim} lo:hi ranges")
        box = np.array([[float(a) for a in p.split(":")] for p in box_parts])
        x0 = np.array([float(v) for v in geo["x0"].split(",")]) if "x0" in geo else None
    except KeyError as e:
        raise ContractViolation(f"geometry section missing key {e}")
    n_samples = int(geo.get("n_surface_samples", 200))
    spec = GeometrySpec(metric, phi_plus, phi_minus, box,
                        n_surface_samples=n_samples, name=geo.get("name", "config"))
    if x0 is None:
        raise ContractViolation("geometry section needs x0 for certification commands")
    return ModelSpec(spec.name, dim - 1, spec, x0)


def resolve_model(args) -> ModelSpec:
    if args.model:
        model = get_model(args.model, n_surface_samples=args.samples or 200)
    elif args.config:
        sections = parse_config_file(args.config)
        if "geometry" not in sections:
            raise ContractViolation("config file has no [geometry] section")
        model = geometry_from_config(sections["geometry"])
    else:
        raise ContractViolation("need --model or --config with a [geometry] section")
    if args.tol_zero != model.geometry.tol_zero:
        geo = dataclasses.replace(model.geometry, tol_zero=args.tol_zero)
        model = dataclasses.replace(model, geometry=geo)
    return model


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    model = resolve_model(args)
    rep = check_assumptions(model.geometry, tol_char=args.tol_char, tol_pos=args.tol_pos)
    payload = {
        "command": "check",
        "model": model.name,
        "seed": args.seed,
        "hypotheses": rep.to_dict(),
    }
    ok = rep.passed()
    if ok:
        payload["split_signs"] = verify_split_signs(model.geometry, tol_pos=args.tol_pos)
        payload["sublevel_inclusion"] = verify_sublevel_inclusion(
            model.geometry, lam=args.lam or 2.0, radius=0.1, n_samples=200, seed=args.seed)
        ok = (payload["split_signs"]["status"] == "pass"
              and payload["sublevel_inclusion"]["included"])
    payload["passed"] = bool(ok)
    write_report(args.out, payload)
    return 0 if ok else 1


def cmd_certify(args) -> int:
    model = resolve_model(args)
    cert = certify(model.geometry, model.x0, lam=args.lam,
                   n=args.samples or 2000, eps_c=args.eps_c,
                   tol_pos=args.tol_pos, seed=args.seed)
    payload = {
        "command": "certify",
        "model": model.name,
        "seed": args.seed,
        "certificate": cert.to_dict(),
        "passed": cert.status == "certified",
    }
    write_report(args.out, payload)
    dim = model.geometry.dim
    header = [f"xi{i + 1}" for i in range(dim)] + ["res_p", "res_hp", "margin", "margin_direct"]
    write_csv(args.out, "constraint_samples.csv", header, cert.sample_rows())
    return 0 if cert.status == "certified" else 1


def cmd_rays(args) -> int:
    model = resolve_model(args)
    lam = args.lam if args.lam is not None else 2.0
    cert = certify(model.geometry, model.x0, lam=lam,
                   n=min(args.samples or 1000, 1000), eps_c=args.eps_c,
                   tol_pos=args.tol_pos, seed=args.seed)
    if cert.status != "certified":
        write_report(args.out, {"command": "rays", "model": model.name,
                                "seed": args.seed, "passed": False,
                                "reason": f"certification status {cert.status}"})
        return 1
    psi0, psi1 = build_psi(model.geometry)
    bent = linear_combination([(1.0, psi1), (-lam, squared_field(psi0))], name="bent")
    q = model.geometry.Q
    ds, s_fit = args.ds, args.s_fit
    n_steps = int(np.ceil(s_fit / ds)) + 2
    results = []
    csv_rows = []
    ok = True
    drift = 0.0
    max_rays = min(len(cert.samples), args.max_rays)
    for ray_id in range(max_rays):
        xi = cert.samples[ray_id].xi
        traj = integrate(q, PhasePoint(model.x0, xi), ds, n_steps, two_sided=True)
        drift = max(drift, traj.conservation_defect())
        rep = contact(traj, q, bent, s_fit=s_fit)
        results.append({"ray": ray_id, "field": "bent", **rep.to_dict()})
        ok = ok and rep.tangency and rep.side == "below"
        for row in traj.annotate(bent).rows():
            csv_rows.append([ray_id, "bent"] + row)
        rep1 = contact(traj, q, psi1, s_fit=s_fit)
        results.append({"ray": ray_id, "field": "surface", **rep1.to_dict()})
        ok = ok and rep1.side == "above"
    payload = {
        "command": "rays",
        "model": model.name,
        "seed": args.seed,
        "lambda": lam,
        "n_rays": max_rays,
        "contacts": results,
        "conservation_defect": drift,
        "passed": bool(ok),
    }
    write_report(args.out, payload)
    dim = model.geometry.dim
    header = (["ray", "field", "s"] + [f"x{i + 1}" for i in range(dim)]
              + [f"xi{i + 1}" for i in range(dim)] + ["p", "psi"])
    write_csv(args.out, "rays.csv", header, csv_rows)
    return 0 if ok else 1


def cmd_corner(args) -> int:
    dim = args.dim
    cells = args.grid or (512 if dim == 2 else 64)
    grid = make_grid(unit_box(dim), cells)
    h2 = float(np.max(grid.h)) ** 2
    tests = bump_corpus(unit_box(dim), args.tests, seed=args.seed + 42)
    corpus = corner_corpus(grid)
    tols = {k: v * h2 for k, v in WEAK_K.items()}

    identity_reports = []
    ok = True
    residual_rows = []
    for cf in corpus:
        rep = verify_extension_identities(cf, tests, tol_weak=tols)
        ok = ok and rep["passed"]
        identity_reports.append({"field": cf.name, "passed": rep["passed"],
                                 "family_max_residual": rep["family_max_residual"]})
        for row in rep["rows"]:
            residual_rows.append([cf.name, row["family"], "".join(map(str, row["alpha"])),
                                  row["testfn"], row["lhs"], row["rhs"], row["residual"]])

    layer = detect_layer(corpus[0], tests)
    layer_ok = layer["max_mismatch"] <= max(0.01 * layer["max_layer_magnitude"], 10 * h2)
    ok = ok and layer_ok

    bmat = np.zeros((dim, dim))
    bmat[0, 1] = bmat[1, 0] = 1.0
    transfer = verify_inequality_transfer(corpus[1], BMatrixField.from_matrix(bmat),
                                          n_pts=args.n_pts, seed=args.seed)
    ok = ok and transfer["passed"]

    # smoothing ladder: halve from min(0.35, 64h) while staying resolved
    # (>= 4h), at most five rungs; expected decay scales with rung count
    hmax = float(np.max(grid.h))
    eps_list = []
    eps_v = min(0.35, 64.0 * hmax)
    while eps_v >= 4.0 * hmax - 1e-12 and len(eps_list) < 5:
        eps_list.append(eps_v)
        eps_v /= 2.0
    decay_bound = 0.5 ** ((len(eps_list) - 1) / 2.0)
    mesh = grid.meshgrid()
    afield = SampledField(0.5 + 0.4 * mesh[0],
                          [0.4 * np.ones(grid.shape)] + [np.zeros(grid.shape)] * (dim - 1))
    moll_norms = [mollifier_commutator(afield, v, grid, eps_list)
                  for v in kink_profile_corpus(grid, count=2, seed=args.seed + 5)]
    moll_ok = all(all(n1 > n2 for n1, n2 in zip(ns, ns[1:]))
                  and ns[-1] <= decay_bound * ns[0]
                  for ns in moll_norms)
    ok = ok and moll_ok

    payload = {
        "command": "corner",
        "seed": args.seed,
        "dim": dim,
        "cells": cells,
        "identity_checks": identity_reports,
        "tolerances": {k: float(v) for k, v in tols.items()},
        "layer_probe": {"max_mismatch": layer["max_mismatch"],
                        "max_layer_magnitude": layer["max_layer_magnitude"],
                        "passed": bool(layer_ok)},
        "inequality_transfer": transfer,
        "mollifier": {"eps": eps_list, "norms": moll_norms, "passed": bool(moll_ok)},
        "passed": bool(ok),
    }
    write_report(args.out, payload)
    write_csv(args.out, "corner_residuals.csv",
              ["field", "family", "alpha", "testfn", "lhs", "rhs", "residual"],
              residual_rows)
    return 0 if ok else 1


def cmd_carleman(args) -> int:
    q, bent, box = carleman_section(lam=args.lam if args.lam is not None else 2.0)
    cells = args.grid or 256
    grid = make_grid(box, cells)
    corpus = bump_superposition_values(grid, args.corpus, seed=args.seed + 7)
    weight = build_weight(bent, mu=args.mu)
    lambdas = []
    lam_v = 1.0
    while lam_v <= args.lambda_max + 1e-9:
        lambdas.append(lam_v)
        lam_v *= 2.0
    rep = lambda_sweep(q, weight, corpus, lambdas, grid)
    s1, s2 = exponent_slopes(rep)
    floor = rep.r_floor(4.0)
    ok = (floor > 0 and not rep.decreasing_flags
          and abs(s1 - 0.5) <= 0.05 and abs(s2 - 1.5) <= 0.05)
    payload = {
        "command": "carleman",
        "seed": args.seed,
        "mu": args.mu,
        "cells": cells,
        "sweep": rep.to_dict(),
        "r_floor_from_lam4": floor,
        "exponent_slopes": [s1, s2],
        "passed": bool(ok),
    }
    write_report(args.out, payload)
    write_csv(args.out, "carleman_ratios.csv",
              ["testfn_id", "lambda", "lhs", "rhs1", "rhs2", "ratio"],
              rep.csv_rows())
    return 0 if ok else 1


def cmd_all(args) -> int:
    stages = [("check", cmd_check), ("certify", cmd_certify), ("rays", cmd_rays),
              ("corner", cmd_corner), ("carleman", cmd_carleman)]
    root = args.out
    statuses = {}
    worst = 0
    for name, fn in stages:
        sub = argparse.Namespace(**vars(args))
        sub.out = os.path.join(root, name)
        rc = fn(sub)
        statuses[name] = rc
        worst = max(worst, rc)
    write_report(root, {"command": "all", "seed": args.seed,
                        "stage_exit_codes": statuses, "passed": worst == 0})
    return worst


# defaults used to decide whether a [run] key was overridden on the CLI
_RUN_KEYS = {
    "lambda": ("lam", float, None),
    "mu": ("mu", float, 1.0),
    "grid": ("grid", int, None),
    "samples": ("samples", int, None),
    "seed": ("seed", int, 0),
    "out": ("out", str, "uccert-out"),
    "eps_c": ("eps_c", float, 1e-10),
    "lambda_max": ("lambda_max", float, 64.0),
    "model": ("model", str, None),
}


def cmd_run(args) -> int:
    """Dispatch on the command named in the config file's [run] section.

    CLI flags still win over config values; config values win over built-in
    defaults.
    """
    if not args.config:
        raise ContractViolation("run needs --config with a [run] section")
    sections = parse_config_file(args.config)
    run = sections.get("run")
    if not run or "command" not in run:
        raise ContractViolation("config file has no [run] section with a command")
    command = run["command"].strip()
    if command not in _COMMANDS or command == "run":
        raise ContractViolation(f"unknown command {command!r} in [run] section")
    for key, (attr, cast, default) in _RUN_KEYS.items():
        if key in run and getattr(args, attr) == default:
            setattr(args, attr, cast(run[key]))
    return _COMMANDS[command](args)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="uccert",
        description="certification toolkit for wave-type symbols and surface pairs")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", help="built-in model name (ik2, ik3, ctrl-a/b/c)")
        sp.add_argument("--config", help="config file path")
        sp.add_argument("--out", default="uccert-out", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--samples", type=int, default=None,
                        help="surface/constraint sample count")
        sp.add_argument("--lambda", dest="lam", type=float, default=None)
        sp.add_argument("--mu", type=float, default=1.0)
        sp.add_argument("--grid", type=int, default=None, help="cells per axis")
        sp.add_argument("--eps-c", type=float, default=1e-10)
        sp.add_argument("--tol-zero", type=float, default=1e-10)
        sp.add_argument("--tol-char", type=float, default=1e-8)
        sp.add_argument("--tol-pos", type=float, default=1e-6)
        sp.add_argument("--ds", type=float, default=1e-3)
        sp.add_argument("--s-fit", type=float, default=0.05)
        sp.add_argument("--max-rays", type=int, default=8)
        sp.add_argument("--dim", type=int, default=2, choices=(2, 3))
        sp.add_argument("--tests", type=int, default=20)
        sp.add_argument("--n-pts", type=int, default=10000)
        sp.add_argument("--corpus", type=int, default=50)
        sp.add_argument("--lambda-max", type=float, default=64.0)

    for name in ("check", "certify", "rays", "corner", "carleman", "all", "run"):
        common(sub.add_parser(name))
    return p


_COMMANDS = {"check": cmd_check, "certify": cmd_certify, "rays": cmd_rays,
             "corner": cmd_corner, "carleman": cmd_carleman, "all": cmd_all,
             "run": cmd_run}


def _validate_args(args):
    for name in ("tol_zero", "tol_char", "tol_pos", "eps_c", "ds", "s_fit", "mu"):
        if getattr(args, name) <= 0:
            raise ContractViolation(f"--{name.replace('_', '-')} must be positive")


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        _validate_args(args)
        return _COMMANDS[args.command](args)
    except (UccertError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"uccert: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
