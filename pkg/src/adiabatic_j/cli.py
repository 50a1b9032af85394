"""Command line entry point: ``adiabatic-j <command> CONFIG [options]``.

Exit codes: 0 success, 1 configuration error, 2 solver failure (the report is
still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import __version__
from .adiabatic import ExpansionState, expand, normalize, realize, residual_order_study
from .config import ExperimentConfig
from .exceptions import AdiabaticError, ConfigError, NoConvergence
from .fibration import fiber_constant_cb
from .forms import FormField
from .grid import load_field, save_field
from .jnef import c1_constant, converse_expansion_check, fiber_pair_audits, pair_audit, slope_audit
from .newton import newton_solve

log = logging.getLogger("adiabatic_j")

PLOT_COLUMNS = ("k", "r", "residual_sup", "residual_l2", "slope_fit")


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _header(cfg, command):
    return {"command": command, "config_hash": cfg.hash, "version": __version__}


def _cache_dir(cfg):
    root = os.environ.get("ADIABATIC_CACHE_DIR")
    return Path(root) / cfg.hash if root else None


def _normalized(cfg):
    """Normalized ``(omega_X, omega_B, report)``, read from the field cache when possible."""
    cache = _cache_dir(cfg)
    if cache is not None and (cache / "normalize.json").exists():
        rep = json.loads((cache / "normalize.json").read_text())
        return FormField(load_field(cache / "omega_X_normalized")), load_field(cache / "omega_B_normalized"), rep
    om, ob, rep = normalize(cfg.omega_X(), cfg.chi(), cfg.omega_B())
    rep = rep.as_dict()
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
        save_field(cache / "omega_X_normalized", om.matrix)
        save_field(cache / "omega_B_normalized", ob)
        _write_json(cache / "normalize.json", rep)
    return om, ob, rep


def _state(cfg, order):
    cache = _cache_dir(cfg)
    path = cache / f"state_r{order}" if cache is not None else None
    if path is not None and (path / "state.json").exists():
        return ExpansionState.load(path)
    om, ob, _ = _normalized(cfg)
    st = expand(cfg.chi(), om, ob, order, tol=cfg.tolerances["cg"], check_tol=cfg.tolerances["normalize"])
    if path is not None:
        st.save(path)
    return st


# subcommands ----------------------------------------------------------------

def cmd_validate(cfg, args, out):
    margins = cfg.validate()
    chi, om = cfg.chi(), cfg.omega_X()
    cb, spread = fiber_constant_cb(chi, om)
    checks = {
        "positivity": margins,
        "closed": {"chi": chi.closed, "omega_X": om.closed},
        "fiber_constant": cb,
        "fiber_constant_deviation": spread,
    }
    ok = spread <= cfg.tolerances["normalize"] and chi.closed and om.closed
    checks["ok"] = bool(ok)
    _write_json(out / "validate.json", {**_header(cfg, "validate"), **checks})
    if not ok:
        raise ConfigError("c_b depends on the base point or a form is not closed")


def cmd_normalize(cfg, args, out):
    om, ob, rep = _normalized(cfg)
    fields = out / "fields"
    fields.mkdir(exist_ok=True)
    save_field(fields / "omega_X_normalized", om.matrix)
    save_field(fields / "omega_B_normalized", ob)
    _write_json(out / "normalize.json", {**_header(cfg, "normalize"), **rep})


def cmd_expand(cfg, args, out):
    order = args.order if args.order is not None else int(cfg["order"])
    st = _state(cfg, order)
    st.save(out / f"state_r{order}")
    _write_json(out / "expand.json", {
        **_header(cfg, "expand"),
        "order": order,
        "constants": st.constants,
        "k_min": st.k_min,
        "positivity_margins": st.margins,
        "diagnostics": st.diagnostics,
    })


def cmd_solve(cfg, args, out):
    k = float(args.k if args.k is not None else cfg["k_solve"])
    order = args.order if args.order is not None else int(cfg["order"])
    st = _state(cfg, order)
    chi = cfg.chi()
    tol = cfg.tolerances
    try:
        omega, report = newton_solve(realize(st, k), chi, tol=tol["newton"], maxiter=int(tol["newton_maxiter"]), k=k)
    except NoConvergence as exc:
        if exc.report is not None:
            (out / "solve_history.csv").write_text(exc.report.to_csv())
            _write_json(out / "solve.json", {**_header(cfg, "solve"), "order": order, "status": "failed",
                                             **exc.report.as_dict()})
        raise
    fields = out / "fields"
    fields.mkdir(exist_ok=True)
    save_field(fields / f"solution_k{k:g}", omega.matrix)
    (out / "solve_history.csv").write_text(report.to_csv())
    _write_json(out / "solve.json", {**_header(cfg, "solve"), "order": order, "status": "converged",
                                     "final_residual": report.residual_sup[-1], **report.as_dict()})


def _parse_list(text, conv):
    return [conv(t) for t in text.split(",") if t.strip()]


def cmd_study(cfg, args, out):
    orders = _parse_list(args.orders, int) if args.orders else [int(o) for o in cfg["orders"]]
    ks = _parse_list(args.k, float) if args.k else [float(k) for k in cfg["k_list"]]
    full = _state(cfg, max(orders))
    rows, fits = [], []
    for r in orders:
        study = residual_order_study(full.truncate(r), ks)
        rows.extend(study.rows())
        fits.append({"r": r, "slope": study.slope, "intercept": study.intercept,
                     "residual_sup": study.residual_sup, "residual_l2": study.residual_l2})
    with open(out / "PLOT_DATA.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PLOT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: (repr(float(row[c])) if c != "r" else row[c]) for c in PLOT_COLUMNS})
    _write_json(out / "study.json", {**_header(cfg, "study"), "k": ks, "constants": full.constants, "fits": fits})


def cmd_jnef(cfg, args, out):
    ks = _parse_list(args.k_list, float) if args.k_list else [float(k) for k in cfg["jnef_k_list"]]
    chi = cfg.chi()
    om, ob, _ = _normalized(cfg)
    audits = []
    for k in ks:
        omega_k = FormField(om.matrix.copy(), om.closed)
        omega_k.matrix[1, 1] += k * ob
        ledger = slope_audit(chi, omega_k)
        (out / f"jnef_k{k:g}.csv").write_text(ledger.to_csv())
        audits.append({"k": k, **ledger.summary()})
    fib_ok, _ = fiber_pair_audits(chi, om)
    from .fibration import push_chi_H

    base = pair_audit(push_chi_H(chi, om), ob)
    conv = converse_expansion_check(chi, om, ob, ks)
    _write_json(out / "jnef.json", {
        **_header(cfg, "jnef"),
        "audits": audits,
        "fiber_pair_audit": {"verdict": "J-nef" if fib_ok else "not J-nef", "vacuous": True},
        "base_pair_audit": base,
        "c1_constant": c1_constant(chi, om, ob),
        "converse": conv.as_dict(),
    })


COMMANDS = {
    "validate": cmd_validate,
    "normalize": cmd_normalize,
    "expand": cmd_expand,
    "solve": cmd_solve,
    "study": cmd_study,
    "jnef": cmd_jnef,
}


def build_parser():
    p = argparse.ArgumentParser(prog="adiabatic-j", description="Adiabatic-limit solver for the J-equation.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", help="experiment configuration (JSON)")
        s.add_argument("--out", help="output directory (overrides the config)")
        s.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="FFT worker threads")
        s.add_argument("-v", "--verbose", action="store_true")
        if name in ("expand", "solve"):
            s.add_argument("--order", type=int)
        if name == "solve":
            s.add_argument("--k", type=float)
        if name == "study":
            s.add_argument("--orders", help="comma separated, e.g. 0,1,2")
            s.add_argument("--k", help="comma separated, e.g. 16,32,64,128")
        if name == "jnef":
            s.add_argument("--k-list", dest="k_list", help="comma separated k values")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        out = Path(args.out or cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        with sfft.set_workers(max(1, args.threads)):
            COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (AdiabaticError, ArithmeticError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        if not (out / f"{args.command}.json").exists():
            _write_json(out / f"{args.command}.json",
                        {**_header(cfg, args.command), "status": "failed", "error": str(exc)})
        return 2
    log.info("wrote %s", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
