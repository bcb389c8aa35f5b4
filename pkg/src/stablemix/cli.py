"""Command-line experiment runner.

Usage::

    stablemix SUBCOMMAND [--config PATH] [--out DIR] [--seed U64] [--workers N] [--strict]

Configuration is JSON with a ``schema`` field; unknown keys are rejected.
Any top-level key can be overridden by an environment variable ``STF_<KEY>``
(JSON-decoded when possible); command-line flags win over both.
``STF_WORKERS`` sets the default worker count.

Exit codes: 0 success, 1 usage or configuration error, 2 audit violation,
3 inconclusive verdict under ``--strict``.
"""
from __future__ import annotations

import argparse
import csv
import glob
import json
import math
import os
import platform
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from . import boundary as bd
from .actions import (
    BUILTIN_ACTIONS,
    BoundaryAction,
    RosinskiKernel,
    builtin_action,
    cocycle_audit,
    maharam_audit,
)
from .artifacts import config_hash, svg_line_plot, write_csv, write_json, write_text_atomic
from .diagnostics import (
    DecayTable,
    f_mixing_empirical,
    gross_average,
    mpns_average,
    neveu_classify,
    truncation_audit,
)
from .groups import GroupSpec, ResourceError
from .measures import SimpleFunction, as_fraction
from .stable import StableFieldSpec, char_table, lepage_samples, scale_of

SCHEMA = "stablemix/1"

SUBCOMMANDS = ("gross", "mpns", "truncation", "fmix", "boundary-decay", "cond-suff", "bms",
               "cond-suff2", "walk", "simulate", "audit", "report")

STOCHASTIC = {"fmix", "walk", "simulate"}

DEFAULTS = {
    "schema": SCHEMA,
    "action": None,
    "group": None,
    "f_e": None,
    "alpha": "1",
    "delta": "1/2",
    "eps": "1/2",
    "K": None,
    "L": ["3", "9"],
    "averaging": "auto",
    "n": None,
    "series_terms": 2000,
    "tail_terms": 256,
    "replicates": 10000,
    "seed": None,
    "out": "out",
    "caps": {"max_depth": 16, "ball_radius": 8, "sphere_radius": 12},
    "base": None,
    "interval": ["1/2", "2"],
    "k": 2,
    "r": [0, 1],
    "m": [2, 4, 6, 8],
    "radius_max": 8,
    "depth": 3,
    "elements": None,
    "n_samples": 100000,
    "thetas": [0.5, 1, 2],
    "A": ["0", "inf"],
    "B": ["0", "inf"],
    "g_tuple": None,
    "index": None,
    "actions": None,
    "horizon": 32,
    "exclude_identity": False,
}

CAP_KEYS = {"max_depth", "ball_radius", "sphere_radius"}


class UsageError(Exception):
    """Bad flags or an unresolvable configuration (exit code 1)."""


# ---------------------------------------------------------------------------
# configuration


def load_config(path, env=None) -> dict:
    env = os.environ if env is None else env
    raw = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(raw, dict):
            raise UsageError("config must be a JSON object")
    for name, value in env.items():
        if name.startswith("STF_") and name != "STF_WORKERS":
            key = name[4:].lower()
            match = next((k for k in DEFAULTS if k.lower() == key), None)
            if match is None:
                raise UsageError(f"environment override {name} names no config key")
            try:
                raw[match] = json.loads(value)
            except json.JSONDecodeError:
                raw[match] = value
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("schema", SCHEMA) != SCHEMA:
        raise UsageError(f"unsupported schema {raw.get('schema')!r}; expected {SCHEMA!r}")
    cfg = json.loads(json.dumps(DEFAULTS))
    cfg.update(raw)
    caps = dict(DEFAULTS["caps"])
    extra = set(cfg["caps"]) - CAP_KEYS
    if extra:
        raise UsageError(f"unknown caps: {sorted(extra)}")
    caps.update(cfg["caps"])
    if any(int(v) <= 0 for v in caps.values()):
        raise UsageError("caps must be positive")
    cfg["caps"] = caps
    return cfg


def _num(x) -> Fraction:
    try:
        return as_fraction(x)
    except (TypeError, ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {x!r}") from None


def _real(x) -> float:
    if isinstance(x, str) and x.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if isinstance(x, str) and x.strip().lower() in ("-inf", "-infinity"):
        return -math.inf
    return float(_num(x))


def _action(cfg):
    name = cfg.get("action")
    if not name:
        raise UsageError("config needs an 'action'")
    try:
        action = builtin_action(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.get("group") is not None:
        try:
            group = GroupSpec.from_config(cfg["group"])
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"bad group: {exc}") from None
        if group != action.group:
            raise UsageError(f"group {group} does not match action {name} ({action.group})")
    if isinstance(action, BoundaryAction):
        action.space.max_depth = int(cfg["caps"]["max_depth"])
    return action


def _default_f_e(action) -> list:
    if action.name.startswith("lattice"):
        return [{"region": "(" + ",".join("0" for _ in range(action.group.d)) + ")", "value": "1"}]
    if action.name.startswith("finite"):
        return [{"region": "5", "value": "1"}]
    if action.name.startswith("boundary"):
        return [{"region": "a", "value": "1"}]
    return [{"region": "{}@0", "value": "1"}]


def _f_e(cfg, action) -> SimpleFunction:
    records = cfg.get("f_e") or _default_f_e(action)
    try:
        return SimpleFunction.from_records(action.space, records)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad f_e: {exc}") from None


def _elements(cfg, group, key, default):
    items = cfg.get(key)
    if items is None:
        return default
    try:
        return [group.parse(t) for t in items]
    except ValueError as exc:
        raise UsageError(f"bad element in {key}: {exc}") from None


def _n_list(cfg, action):
    if cfg.get("n"):
        return [int(n) for n in cfg["n"]]
    if action.group.amenable:
        return [1, 2, 4, 8, 16, 32, 64] if action.group.kind == "lattice" else [1, 2, 3]
    return [2, 4, 6, 8]


def _check_caps(cfg, n_list, kind):
    if kind != "folner" and max(n_list) > int(cfg["caps"]["ball_radius"]):
        raise ResourceError(f"ball radius {max(n_list)} exceeds cap ball_radius={cfg['caps']['ball_radius']}")


def _averaging_kind(cfg, action):
    kind = cfg.get("averaging", "auto")
    if kind == "auto":
        kind = "folner" if action.group.amenable else "ball"
    if kind not in ("folner", "ball"):
        raise UsageError(f"unknown averaging kind {kind!r}")
    return kind


# ---------------------------------------------------------------------------
# outputs


def _versions() -> dict:
    return {"stablemix": __version__, "numpy": np.__version__, "python": platform.python_version()}


def _provenance(sub, cfg) -> dict:
    clean = {k: v for k, v in cfg.items() if k not in ("out",)}
    return {"subcommand": sub, "config": clean, "config_hash": config_hash(clean),
            "seed": cfg.get("seed"), "versions": _versions()}


def _emit_table(out, stem, table, sub, cfg, extra=None):
    rows = table.csv_rows()
    write_csv(os.path.join(out, f"{stem}.csv"), ["n", "value", "exact_p_over_q", "se", "verdict"], rows)
    payload = {**_provenance(sub, cfg), "action": cfg.get("action"), "verdict": table.verdict,
               "rule": table.rule, "rule_status": "engineering threshold, evidence only", "rows": rows}
    if extra:
        payload.update(extra)
    write_json(os.path.join(out, f"{stem}.json"), payload)
    ns = [r[0] for r in table.rows]
    _write_svg(out, stem, svg_line_plot(ns, [r[1] for r in table.rows], title=stem))
    return table.verdict


def _write_svg(out, stem, svg):
    write_text_atomic(os.path.join(out, f"{stem}.svg"), svg)


def _emit_exact(out, stem, pairs, sub, cfg, extra=None):
    return _emit_table(out, stem, DecayTable([(n, float(v), v, None) for n, v in pairs], label=stem),
                       sub, cfg, extra)


# ---------------------------------------------------------------------------
# subcommands


def cmd_gross(cfg, out, workers):
    action = _action(cfg)
    kind = _averaging_kind(cfg, action)
    n_list = _n_list(cfg, action)
    _check_caps(cfg, n_list, kind)
    table = gross_average(action, _f_e(cfg, action), _num(cfg["alpha"]), _num(cfg["delta"]),
                          _num(cfg["eps"]), n_list, kind, workers)
    return _emit_table(out, "gross", table, "gross", cfg,
                       {"ground_truth": action.ground_truth}), None


def _base(cfg, action):
    if cfg.get("base") is not None:
        try:
            return [action.space.parse_cell(t) for t in cfg["base"]]
        except ValueError as exc:
            raise UsageError(f"bad base region: {exc}") from None
    if getattr(action.space, "total_mass", math.inf) != math.inf:
        return list(action.space.whole())
    return action.probe_cells(0)[:1]


def cmd_mpns(cfg, out, workers):
    action = _action(cfg)
    kind = _averaging_kind(cfg, action)
    n_list = _n_list(cfg, action)
    _check_caps(cfg, n_list, kind)
    lo, hi = (_num(t) for t in cfg["interval"])
    table = mpns_average(action, _base(cfg, action), (lo, hi), n_list, kind, workers)
    return _emit_table(out, "mpns", table, "mpns", cfg, {"ground_truth": action.ground_truth}), None


def cmd_truncation(cfg, out, workers):
    action = _action(cfg)
    f_e = _f_e(cfg, action)
    K = _num(cfg["K"]) if cfg.get("K") is not None else f_e.max_abs()
    elements = _elements(cfg, action.group, "elements",
                         action.group.generators() + [action.group.identity()])
    report = truncation_audit(action, f_e, _num(cfg["alpha"]), _num(cfg["delta"]), _num(cfg["eps"]),
                              [_num(x) for x in cfg["L"]], K, elements, int(cfg["depth"]))
    write_json(os.path.join(out, "truncation.json"), {**_provenance("truncation", cfg), **report})
    return ("ok" if report["ok"] else "violation"), (2 if not report["ok"] else None)


def cmd_fmix(cfg, out, workers):
    action = _action(cfg)
    kind = _averaging_kind(cfg, action)
    n_list = [int(n) for n in cfg["n"]] if cfg.get("n") else [1, 2, 4, 8]
    _check_caps(cfg, n_list, kind)
    kernel = RosinskiKernel(action, _f_e(cfg, action), _num(cfg["alpha"]))
    g_tuple = _elements(cfg, action.group, "g_tuple", [action.group.identity()])
    A = tuple(_real(x) for x in cfg["A"])
    B = tuple(_real(x) for x in cfg["B"])
    table = f_mixing_empirical(kernel, A, B, g_tuple, n_list, int(cfg["replicates"]), int(cfg["seed"]),
                               int(cfg["series_terms"]), kind, workers, bool(cfg["exclude_identity"]))
    verdict = _emit_table(out, "fmix", table, "fmix", cfg, {"ground_truth": action.ground_truth})
    write_csv(os.path.join(out, "fmix_cells.csv"), ["n", "h", "value", "se"],
              [{k: (repr(v) if isinstance(v, float) else v) for k, v in c.items()} for c in table.cells])
    return verdict, None


def cmd_boundary_decay(cfg, out, workers):
    k = int(cfg["k"])
    radius = int(cfg["radius_max"])
    if radius > int(cfg["caps"]["sphere_radius"]):
        raise ResourceError(f"radius_max {radius} exceeds cap sphere_radius={cfg['caps']['sphere_radius']}")
    K = _num(cfg["K"]) if cfg.get("K") is not None else Fraction(1)
    pairs = bd.a_set_decay(K, radius, k)
    return _emit_exact(out, "boundary_decay", pairs, "boundary-decay", cfg, {"action": f"boundary-free-{k}"}), None


def _ms(cfg):
    ms = [int(m) for m in cfg["m"]]
    if max(ms) > int(cfg["caps"]["ball_radius"]):
        raise ResourceError(f"ball radius {max(ms)} exceeds cap ball_radius={cfg['caps']['ball_radius']}")
    return ms


def cmd_cond_suff(cfg, out, workers):
    k = int(cfg["k"])
    K = _num(cfg["K"]) if cfg.get("K") is not None else Fraction(2)
    pairs = [(m, bd.cond_suff_average(K, m, k, workers)) for m in _ms(cfg)]
    return _emit_exact(out, "cond_suff", pairs, "cond-suff", cfg, {"action": f"boundary-free-{k}"}), None


def cmd_cond_suff2(cfg, out, workers):
    k = int(cfg["k"])
    verdicts = []
    for r in [int(x) for x in cfg["r"]]:
        pairs = [(m, bd.cond_suff2_average(r, m, k, workers)) for m in _ms(cfg)]
        verdicts.append(_emit_exact(out, f"cond_suff2_r{r}", pairs, "cond-suff2", cfg,
                                    {"action": f"boundary-free-{k}", "r": r}))
    if all(v == "decays" for v in verdicts):
        return "decays", None
    return ("stalls" if "stalls" in verdicts else "inconclusive"), None


def cmd_bms(cfg, out, workers):
    k = int(cfg["k"])
    depth = int(cfg["depth"])
    from .groups import free

    group = free(k)
    gs = _elements(cfg, group, "elements", group.generators())
    space = bd.BoundarySpace(k)
    cells = [w for d in range(1, depth + 1) for w in space.refine([()], d)]
    pairs = [(u, v) for u in cells for v in cells if bd._lcp(u, v) < min(len(u), len(v))]
    violations = []
    for g in gs:
        for u, v in pairs:
            rep = bd.bms_invariance_check(g, bd.CylinderRect([(u, v)], k))
            if not rep["ok"]:
                violations.append({"g": group.format(g), "rect": [space.format_cell(u), space.format_cell(v)],
                                   "before": rep["before"], "after": rep["after"]})
    report = {**_provenance("bms", cfg), "action": f"boundary-free-{k}", "rects": len(pairs),
              "elements": [group.format(g) for g in gs], "violations": violations, "ok": not violations}
    write_json(os.path.join(out, "bms.json"), report)
    return ("ok" if report["ok"] else "violation"), (2 if violations else None)


def cmd_walk(cfg, out, workers):
    k = int(cfg["k"])
    depth = int(cfg["depth"])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(cfg["seed"]))))
    rep = bd.hitting_vs_ps(rng, depth, int(cfg["n_samples"]), k)
    rows = [{"cylinder": r["cylinder"], "exact_p_over_q": f"{r['exact'].numerator}/{r['exact'].denominator}",
             "freq": repr(r["freq"]), "se": repr(r["se"]), "z": repr(r["z"])} for r in rep["rows"]]
    write_csv(os.path.join(out, "walk.csv"), ["cylinder", "exact_p_over_q", "freq", "se", "z"], rows)
    ok = rep["max_abs_z"] <= 3
    write_json(os.path.join(out, "walk.json"),
               {**_provenance("walk", cfg), "action": f"boundary-free-{k}", "max_abs_dev": rep["max_abs_dev"],
                "max_abs_z": rep["max_abs_z"], "n_samples": rep["n_samples"], "ok": ok})
    return ("ok" if ok else "deviation"), None


def cmd_simulate(cfg, out, workers):
    action = _action(cfg)
    kernel = RosinskiKernel(action, _f_e(cfg, action), _num(cfg["alpha"]))
    index = _elements(cfg, action.group, "index", [action.group.identity()] + action.group.generators()[:1])
    spec = StableFieldSpec(kernel, index, int(cfg["series_terms"]), int(cfg["seed"]), int(cfg["tail_terms"]))
    reps = int(cfg["replicates"])
    Y = lepage_samples(spec, reps, workers)
    names = [action.group.format(g) for g in index]
    rows = [[i, names[j], repr(float(Y[i, j]))] for i in range(reps) for j in range(len(index))]
    write_csv(os.path.join(out, "simulate.csv"), ["replicate", "g", "value"], rows)
    chars = []
    for j, g in enumerate(index):
        sigma = scale_of([(1, g)], kernel)
        for theta, re, im, se_re, se_im in char_table(Y[:, j], [float(t) for t in cfg["thetas"]]):
            chars.append([names[j], repr(theta), repr(re), repr(im), repr(se_re), repr(se_im),
                          repr(math.exp(-(sigma * abs(theta)) ** float(kernel.alpha)))])
    write_csv(os.path.join(out, "simulate_char.csv"),
              ["g", "theta", "re", "im", "se_re", "se_im", "exact_re"], chars)
    write_json(os.path.join(out, "simulate.json"),
               {**_provenance("simulate", cfg), "action": action.name, "index": names,
                "meta": {"seed": int(cfg["seed"]), "N": spec.series_terms, "alpha": str(kernel.alpha),
                         "replicates": reps, "tail_terms": spec.tail_terms}})
    return "ok", None


def cmd_audit(cfg, out, workers):
    names = cfg.get("actions") or sorted(BUILTIN_ACTIONS)
    results = {}
    bad = False
    for name in names:
        try:
            action = builtin_action(name)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        gens = action.group.generators() + [action.group.identity()]
        depth = 4 if not isinstance(action, BoundaryAction) or action.k <= 3 else 3
        coc = cocycle_audit(action, [(a, b) for a in gens for b in gens], depth)
        mah = maharam_audit(action, gens, depth)
        nev = neveu_classify(action, int(cfg["horizon"]), workers)
        f_e = SimpleFunction.from_records(action.space, _default_f_e(action))
        n_list = [r[0] for r in nev["table"].rows]
        gross = gross_average(action, f_e, 1, Fraction(1, 2), Fraction(1, 2), n_list, "auto", workers)
        agree = (gross.verdict == "decays") == (nev["verdict"] == "null-evidence")
        matches = nev["verdict"] == {"null": "null-evidence", "positive": "positive-evidence"}[action.ground_truth]
        results[name] = {"cocycle_ok": coc["ok"], "cocycle_violations": coc["violations"][:10],
                         "maharam_ok": mah["ok"], "maharam_violations": mah["violations"][:10],
                         "neveu": nev["verdict"], "gross": gross.verdict, "ground_truth": action.ground_truth,
                         "verdicts_agree": agree, "matches_ground_truth": matches,
                         "cells_checked": coc["cells_checked"] + mah["cells_checked"]}
        bad = bad or not (coc["ok"] and mah["ok"] and agree and matches)
    write_json(os.path.join(out, "audit.json"), {**_provenance("audit", cfg), "results": results, "ok": not bad})
    return ("ok" if not bad else "violation"), (2 if bad else None)


def cmd_report(cfg, out, workers):
    files = sorted(glob.glob(os.path.join(out, "*.json")))
    files = [f for f in files if os.path.basename(f) != "summary.json"]
    artifacts = []
    per_action = {}
    for path in files:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
            if not isinstance(data, dict) or "subcommand" not in data:
                raise ValueError("not a stablemix artifact")
        except (OSError, ValueError) as exc:
            raise CorruptArtifact(path, exc) from None
        entry = {"file": os.path.basename(path), "subcommand": data["subcommand"],
                 "action": data.get("action"), "verdict": data.get("verdict"), "ok": data.get("ok"),
                 "seed": data.get("seed"), "config_hash": data.get("config_hash")}
        artifacts.append(entry)
        if data["subcommand"] == "audit":
            for name, res in data.get("results", {}).items():
                per_action.setdefault(name, {}).update(
                    {"neveu": res["neveu"], "gross": res["gross"], "ground_truth": res["ground_truth"],
                     "matches_ground_truth": res["matches_ground_truth"]})
        elif entry["action"]:
            per_action.setdefault(entry["action"], {})[data["subcommand"]] = entry["verdict"] or (
                "ok" if entry["ok"] else "violation")
    for path in sorted(glob.glob(os.path.join(out, "*.csv"))):
        try:
            with open(path, encoding="utf-8", newline="") as fh:
                rows = list(csv.reader(fh))
            if not rows or any(len(r) != len(rows[0]) for r in rows):
                raise ValueError("ragged or empty CSV")
        except (OSError, ValueError, UnicodeDecodeError) as exc:
            raise CorruptArtifact(path, exc) from None
    summary = {"schema": SCHEMA, "artifacts": artifacts, "per_action": per_action,
               "seeds": sorted({a["seed"] for a in artifacts if a["seed"] is not None}),
               "config_hash": config_hash([a["config_hash"] for a in artifacts]),
               "versions": _versions()}
    write_json(os.path.join(out, "summary.json"), summary)
    return "ok", None


class CorruptArtifact(Exception):
    def __init__(self, path, exc):
        super().__init__(f"corrupt artifact {path}: {exc}")
        self.path = path


COMMANDS = {
    "gross": cmd_gross,
    "mpns": cmd_mpns,
    "truncation": cmd_truncation,
    "fmix": cmd_fmix,
    "boundary-decay": cmd_boundary_decay,
    "cond-suff": cmd_cond_suff,
    "bms": cmd_bms,
    "cond-suff2": cmd_cond_suff2,
    "walk": cmd_walk,
    "simulate": cmd_simulate,
    "audit": cmd_audit,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stablemix", description="Mixing diagnostics for stationary SaS random fields.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--strict", action="store_true", help="exit 3 on an inconclusive verdict")
    p.add_argument("--version", action="version", version=f"stablemix {__version__}")
    return p


def run(argv=None, env=None) -> int:
    env = os.environ if env is None else env
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config, env)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.out is not None:
            cfg["out"] = args.out
        workers = args.workers
        if workers is None:
            try:
                workers = int(env.get("STF_WORKERS", 1))
            except ValueError:
                raise UsageError("STF_WORKERS must be an integer") from None
        if workers < 1:
            raise UsageError("--workers must be >= 1")
        if args.subcommand in STOCHASTIC:
            if cfg.get("seed") is None:
                raise UsageError(f"{args.subcommand} is stochastic and needs a seed")
            if not 0 <= int(cfg["seed"]) < 2 ** 64:
                raise UsageError("seed must be an unsigned 64-bit integer")
        out = cfg["out"]
        os.makedirs(out, exist_ok=True)
        verdict, code = COMMANDS[args.subcommand](cfg, out, workers)
    except UsageError as exc:
        print(f"stablemix: error: {exc}", file=sys.stderr)
        return 1
    except CorruptArtifact as exc:
        print(f"stablemix: error: {exc}", file=sys.stderr)
        return 1
    except ResourceError as exc:
        print(f"stablemix: resource cap exceeded: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"stablemix: error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.subcommand}: {verdict}")
    if code:
        return code
    if args.strict and verdict == "inconclusive":
        return 3
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
