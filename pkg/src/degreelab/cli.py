"""Configuration-driven command line: ``degreelab <command> --config ...``.

Commands: validate, degrees, stability, spectral, green, ergodic,
contraction, report.  Every run reads one strict JSON config, writes
``report.json`` (plus ``grid.csv`` and ``grid.meta.json`` for grids) into
the output directory, and exits 0 on success, 2 on an invalid config and
3 on a numerical failure with a machine-readable failure record.
"""

import argparse
import json
import sys

import jsonschema

from . import __version__
from . import contraction as K
from . import currents as C
from . import ergodic as E
from . import lattice as lat
from . import models as M
from . import stability as S
from ._kernels import BACKEND
from .errors import (BudgetError, DegreeLabError, HypothesisViolation,
                     IndeterminateError, ModelRejected, NumericalFailure,
                     PreconditionError, StructuralFailure, UnsupportedError)
from .report import canonical_json, jsonable, model_hash, write_atomic

COMMANDS = ("validate", "degrees", "stability", "spectral", "green",
            "ergodic", "contraction", "report")

TOL_DEFAULTS = {
    "membership": 1e-8,     # orbit membership against indeterminacy tables
    "green": 1e-9,          # tail stopping threshold of the potential series
    "zero": 1e-9,           # self-intersection and pairing zero tests
    "eigen": 1e-8,          # pushforward eigen-equation residual
    "psd": 1e-9,            # expansion-form semidefiniteness slack
    "nef": 1e-9,            # nef membership slack for float eigenvectors
    "spectral": 1e-9,       # slack on the sqrt(lambda2) eigenvalue bound
    "mc_exponent": 1e-3,    # Monte Carlo exponent agreement
    "exact_sum": 1e-6,      # exact exponent sum rule
    "cluster": 1e-7,        # root multiplicity clustering radius
}

INT_DEFAULTS = {
    "seed": 0,
    "horizon": 50,
    "n_max": 40,        # orbit length for potential series
    "n_samples": 100,   # sample points for residuals / MC degree
    "degree_n": 3,      # symbolic degree sequence length
    "depth": 6,         # pushforward tree depth
    "haar_n": 3,        # rational grid level
    "n_steps": 10000,   # exponent orbit length
    "mc_samples": 4,    # exponent orbit count
}

_NUMBER = {"type": "number"}
_COEFF = {"oneOf": [{"type": "number"},
                    {"type": "array", "items": _NUMBER,
                     "minItems": 2, "maxItems": 2}]}
_GAUSS_INT = {"type": "array", "items": {"type": "integer"},
              "minItems": 2, "maxItems": 2}

_FACTOR_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["sigma", "power", "linear", "custom"]},
        "exponent": {"type": "integer"},
        "matrix": {"type": "array", "minItems": 3, "maxItems": 3,
                   "items": {"type": "array", "minItems": 3, "maxItems": 3,
                             "items": _COEFF}},
        "components": {"type": "array", "minItems": 3, "maxItems": 3,
                       "items": {"type": "array",
                                 "items": {"type": "array", "minItems": 4,
                                           "maxItems": 4}}},
        "lambda2": {"type": "integer"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SLICE_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["p2", "torus", "p1xp1"]},
        "base": {"type": "array", "items": _COEFF},
        "u": {"type": "array", "items": _COEFF},
        "v": {"type": "array", "items": _COEFF},
        "s_range": {"type": "array", "items": _NUMBER, "minItems": 2,
                    "maxItems": 2},
        "t_range": {"type": "array", "items": _NUMBER, "minItems": 2,
                    "maxItems": 2},
    },
    "required": ["kind", "base", "u", "v", "s_range", "t_range"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "model": {
            "type": "object",
            "properties": {
                "family": {"enum": list(M.FAMILIES)},
                "params": {
                    "type": "object",
                    "properties": {
                        "q_coeffs": {"type": "array",
                                     "items": {"type": "array",
                                               "items": _COEFF}},
                        "p_coeffs": {"type": "array", "items": _COEFF},
                        "matrix": {"type": "array", "minItems": 2,
                                   "maxItems": 2,
                                   "items": {"type": "array", "minItems": 2,
                                             "maxItems": 2,
                                             "items": _GAUSS_INT}},
                        "translation": {"type": "array", "minItems": 2,
                                        "maxItems": 2,
                                        "items": {"type": "array",
                                                  "items": _NUMBER,
                                                  "minItems": 2,
                                                  "maxItems": 2}},
                        "factors": {"type": "array", "minItems": 1,
                                    "items": _FACTOR_SCHEMA},
                    },
                    "additionalProperties": False,
                },
            },
            "required": ["family", "params"],
            "additionalProperties": False,
        },
        "command": {"enum": list(COMMANDS)},
        "seed": {"type": "integer"},
        "horizon": {"type": "integer", "minimum": 0},
        "n_max": {"type": "integer", "minimum": 1},
        "n_samples": {"type": "integer", "minimum": 1},
        "degree_n": {"type": "integer", "minimum": 1},
        "depth": {"type": "integer", "minimum": 0},
        "haar_n": {"type": "integer", "minimum": 1},
        "n_steps": {"type": "integer", "minimum": 100},
        "mc_samples": {"type": "integer", "minimum": 1},
        "resolution": {"type": "array", "items": {"type": "integer",
                                                  "minimum": 1},
                       "minItems": 2, "maxItems": 2},
        "slice": _SLICE_SCHEMA,
        "which": {"enum": ["plus", "minus"]},
        "tolerances": {
            "type": "object",
            "properties": {k: _NUMBER for k in TOL_DEFAULTS},
            "additionalProperties": False,
        },
    },
    "required": ["model"],
    "additionalProperties": False,
}


class ConfigError(DegreeLabError):
    pass


def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        path = "$" + "".join(f".{p}" if isinstance(p, str) else f"[{p}]"
                             for p in e.path)
        raise ConfigError(f"config invalid at {path}: {e.message}")


def resolved_tolerances(cfg):
    out = dict(TOL_DEFAULTS)
    out.update(cfg.get("tolerances", {}))
    return out


def resolved_ints(cfg, seed_override=None):
    out = dict(INT_DEFAULTS)
    for k in INT_DEFAULTS:
        if k in cfg:
            out[k] = cfg[k]
    if seed_override is not None:
        out["seed"] = seed_override
    return out


def _model_block(model):
    return {
        "family": model.family,
        "params": jsonable(model.params),
        "hash": model_hash(model),
        "lambda2": model.lambda2,
        "pullback_matrix": jsonable(model.pullback_matrix),
        "lattice": model.lattice.name,
        "surface": model.surface,
        "tables_complete": model.tables_complete,
    }


def _sample_points(model, n, seed):
    import numpy as np
    rng = np.random.default_rng(seed)
    return [M.random_point(model, rng) for _ in range(n)]


# ---------------------------------------------------------------------------
# sections


def _section_spectral(model, tols):
    try:
        rep = lat.spectral_analysis(model.pullback_matrix, model.lambda2,
                                    model.lattice, tol=tols["spectral"])
    except HypothesisViolation as exc:
        return {"verdict": "HypothesisViolation", "detail": str(exc),
                **{k: jsonable(v) for k, v in exc.payload.items()}}
    ap, am, cross = lat.invariant_classes(
        model.pullback_matrix, model.lambda2, model.lattice,
        tol=tols["nef"])
    omega = model.omega()
    defect = lat.pushpull_defect(model.pullback_matrix, model.lattice,
                                 model.lambda2)
    try:
        qform = lat.pullback_expansion_form(
            model.pullback_matrix, model.lattice, model.lambda2,
            tol=tols["psd"])
        psd_ok = True
    except StructuralFailure:
        qform = lat.pullback_expansion_form(
            model.pullback_matrix, model.lattice, model.lambda2,
            tol=tols["psd"], check=False)
        psd_ok = False
    return {
        "verdict": "ok",
        "r1": rep.r1,
        "char_poly": jsonable(rep.char_poly),
        "simple_root": rep.simple_root,
        "second_modulus": rep.second_modulus,
        "sqrt_lambda2_bound_ok": rep.sqrt_lambda2_bound_ok,
        "nef_ok": rep.nef_ok,
        "alpha_plus": jsonable(ap.coords),
        "alpha_minus": jsonable(am.coords),
        "pairings": {
            "alpha_plus_omega": float(lat.pair(model.lattice, ap, omega)),
            "alpha_minus_omega": float(lat.pair(model.lattice, am, omega)),
            "alpha_plus_alpha_minus": float(cross),
        },
        "pushpull_defect": jsonable(defect),
        "pushpull_defect_zero": all(x == 0 for row in defect for x in row),
        "expansion_form": jsonable(qform),
        "expansion_form_psd": psd_ok,
        "tolerances_used": {"spectral": tols["spectral"], "nef": tols["nef"],
                            "psd": tols["psd"]},
    }


def _section_degrees(model, ints, tols):
    r1, cp = lat.spectral_radius(model.pullback_matrix)
    out = {
        "lambda1": r1,
        "lambda2": model.lambda2,
        "char_poly": jsonable(cp),
        "note": ("lambda1 reported as the spectral radius of the pullback "
                 "action; equal to the true degree growth exactly when the "
                 "model is one-stable"),
    }
    if model.surface == "p2":
        drift = S.degree_drift(model, ints["degree_n"])
        est = S.lambda1_estimate(S.DegreeSequence(drift["symbolic"], True))
        out["degree_sequence"] = drift
        out["growth_estimate"] = {
            "ratio": est.estimate,
            "root": est.root_estimate,
            "consistent_with_r1": est.consistent_with(r1),
        }
    return out


def _section_stability(model, ints, tols):
    rep = S.check_one_stability(model, ints["horizon"],
                                membership_tol=tols["membership"])
    return {
        "verdict": str(rep.verdict),
        "verdict_kind": rep.verdict.kind,
        "verdict_n": rep.verdict.n,
        "horizon": rep.horizon,
        "membership_tol": rep.membership_tol,
        "tables_complete": rep.tables_complete,
        "orbit_steps": len(rep.orbit_log),
        "orbit_log": [{"start": e.start_index, "step": e.step,
                       "point": repr(e.point),
                       "hit_indeterminacy": e.hit_indeterminacy}
                      for e in rep.orbit_log],
        "note": rep.note,
    }


def _green_applicable(model):
    if model.family == "TorusEndo":
        return True
    if model.surface != "p2":
        return False
    try:
        C._require_green_capable(model)
        C._check_report_level_stability(model)
    except DegreeLabError:
        return False
    return float(model.pullback_matrix[0][0]) > 1.0


def _section_green(model, ints, tols, which="plus"):
    pts = _sample_points(model, ints["n_samples"], ints["seed"])
    if which == "minus":
        series = []
        for p in pts[: min(16, len(pts))]:
            try:
                s = C.green_minus_series(model, p, ints["depth"])
            except DegreeLabError:
                continue
            series.append(jsonable(s))
        if not series:
            raise NumericalFailure("no usable pushforward sample points")
        return {
            "which": "minus",
            "depth": ints["depth"],
            "series": series,
            "offset": series[0]["offset"],
        }
    residual = C.functional_equation_residual(
        model, pts, tol=tols["green"], n_max=ints["n_max"])
    evs = []
    for p in pts[: min(8, len(pts))]:
        try:
            g = C.green_plus(model, p, tol=tols["green"], n_max=ints["n_max"])
        except IndeterminateError:
            continue
        evs.append(jsonable(g))
    out = {
        "which": "plus",
        "functional_equation_residual": residual,
        "n_samples": ints["n_samples"],
        "n_max": ints["n_max"],
        "green_tol": tols["green"],
        "sample_evaluations": evs,
        "backend": BACKEND,
    }
    if model.family in ("PolynomialSkew", "TorusEndo"):
        series = C.green_minus_series(
            model, pts[0] if model.family == "TorusEndo"
            else _first_affine(model, pts), ints["depth"])
        out["minus_series_example"] = jsonable(series)
    return out


def _first_affine(model, pts):
    for p in pts:
        if abs(p.coords[2]) > 1e-9:
            return p
    raise NumericalFailure("no affine sample point found")


def _section_ergodic(model, ints, tols):
    res = E.lyapunov_exponents(model, n_steps=ints["n_steps"],
                               n_samples=ints["mc_samples"],
                               seed=ints["seed"])
    sum_exact = E.exponent_sum_check(res.exact, model.lambda2,
                                     tol=tols["exact_sum"])
    sum_mc = E.exponent_sum_check(res.mc, model.lambda2,
                                  tol=tols["mc_exponent"])
    haar = E.haar_invariance_check(model, ints["haar_n"])
    jac = E.jacobian_constancy(model, n_samples=64, seed=ints["seed"])
    return {
        "exponents": jsonable(res),
        "sum_check_exact": jsonable(sum_exact),
        "sum_check_mc": jsonable(sum_mc),
        "haar": jsonable(haar),
        "jacobian": jsonable(jac),
    }


def _section_contraction(model, tols):
    try:
        rep = K.contraction_report(model, tol=tols["zero"])
    except HypothesisViolation as exc:
        return {"verdict": "HypothesisViolation", "detail": str(exc)}
    out = jsonable(rep)
    out["verdict"] = "ok"
    return out


def _section_jacobian(model, ints):
    return jsonable(E.jacobian_constancy(model, n_samples=64,
                                         seed=ints["seed"]))


# ---------------------------------------------------------------------------
# commands


def run_command(command, cfg, out_dir, seed_override=None):
    """Execute one command; returns (exit_code, report_dict)."""
    tols = resolved_tolerances(cfg)
    ints = resolved_ints(cfg, seed_override)
    if "command" in cfg and cfg["command"] != command:
        raise ConfigError(
            f"config names command {cfg['command']!r} but {command!r} was "
            "requested")
    model = M.build_model(cfg["model"]["family"], cfg["model"]["params"])
    base = {
        "command": command,
        "library_version": __version__,
        "kernel_backend": BACKEND,
        "model": _model_block(model),
        "seed": ints["seed"],
        "tolerances": tols,
        "parameters": {k: ints[k] for k in sorted(INT_DEFAULTS)},
    }

    if command == "validate":
        base["validation"] = {"ok": True, "message": "model invariants hold"}
        return 0, base

    if command == "degrees":
        base["degrees"] = _section_degrees(model, ints, tols)
        return 0, base

    if command == "stability":
        base["stability"] = _section_stability(model, ints, tols)
        return 0, base

    if command == "spectral":
        base["spectral"] = _section_spectral(model, tols)
        return 0, base

    if command == "green":
        which = cfg.get("which", "plus")
        if "slice" in cfg:
            resolution = tuple(cfg.get("resolution", [64, 64]))
            grid = C.export_grid(model, cfg["slice"], resolution,
                                 which=which, tol=tols["green"],
                                 n_max=ints["n_max"])
            write_atomic(f"{out_dir}/grid.csv", C.grid_to_csv(grid))
            meta = {
                "slice": grid.slice_spec,
                "resolution": list(grid.resolution),
                "which": grid.which,
                "model_hash": base["model"]["hash"],
                "tolerances": tols,
                "n_max": ints["n_max"],
                "masked_cells": int(grid.mask.sum()),
                "kernel_backend": BACKEND,
            }
            write_atomic(f"{out_dir}/grid.meta.json",
                         canonical_json(meta) + "\n")
            base["green"] = {
                "which": which,
                "grid_file": "grid.csv",
                "meta_file": "grid.meta.json",
                "resolution": list(grid.resolution),
                "masked_cells": int(grid.mask.sum()),
            }
        else:
            base["green"] = _section_green(model, ints, tols, which=which)
        return 0, base

    if command == "ergodic":
        base["ergodic"] = _section_ergodic(model, ints, tols)
        return 0, base

    if command == "contraction":
        base["contraction"] = _section_contraction(model, tols)
        return 0, base

    if command == "report":
        base["spectral"] = _section_spectral(model, tols)
        base["degrees"] = _section_degrees(model, ints, tols)
        base["stability"] = _section_stability(model, ints, tols)
        if _green_applicable(model):
            base["green"] = _section_green(model, ints, tols)
        if model.family == "TorusEndo":
            base["ergodic"] = _section_ergodic(model, ints, tols)
        else:
            base["jacobian"] = _section_jacobian(model, ints)
        if base["spectral"].get("verdict") == "ok":
            base["contraction"] = _section_contraction(model, tols)
        return 0, base

    raise ConfigError(f"unknown command {command!r}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="degreelab",
        description="invariants of low-degree meromorphic surface maps")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        code, rep = run_command(args.command, cfg, args.out, args.seed)
    except (ConfigError, ModelRejected, UnsupportedError,
            PreconditionError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        record = {"failure": exc.record() if isinstance(exc, DegreeLabError)
                  else {"message": str(exc)}, "exit_code": 2}
        try:
            write_atomic(f"{args.out}/report.json",
                         canonical_json(jsonable(record)) + "\n")
        except OSError:
            pass
        return 2
    except (IndeterminateError, BudgetError, NumericalFailure,
            StructuralFailure) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        record = {"failure": exc.record(), "partial": True, "exit_code": 3}
        try:
            write_atomic(f"{args.out}/report.json",
                         canonical_json(jsonable(record)) + "\n")
        except OSError:
            pass
        return 3
    write_atomic(f"{args.out}/report.json",
                 canonical_json(jsonable(rep)) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
