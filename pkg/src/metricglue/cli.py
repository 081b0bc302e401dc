"""Command line runner: config in, reports out.

Every subcommand reads one JSON config (``--config``) and lets a few flags
override it. Exit codes: 0 pass, 1 audit or check failure, 2 bad config,
3 pipeline error (the failing stage is printed).
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import audit as au
from .chain import (DEFAULT_HORIZON, DEFAULT_TOL, DEFAULT_WINDOW, EmbeddedNet, ScaleChain,
                    SelectionCertificate, WeakLimitTable, frechet_embed, frechet_pieces, lift_space,
                    net_from_lattice, pairwise_norms, select_subsequence, shell_of, synthetic_chain,
                    validate_chain, verify_certificate, weak_limit)
from .errors import ConfigError, GlueError, InvalidChain
from .glue import AugmentedMap, GluedMap, HatMap, TauPath, build_tau
from .metricspace import from_matrix, space_from_config, validate_space
from .seqspace import NormSpec

log = logging.getLogger("metricglue")

SYNTHETIC = ("identity", "shift", "scaled_shift", "jitter")
MODES = ("bilipschitz", "coarse")

DEFAULTS = {
    "p": 2,
    "mode": "bilipschitz",
    "chain": {"kind": "identity"},
    "net": None,
    "imax": None,
    "kmax": None,
    "selection": {"horizon": DEFAULT_HORIZON, "window": DEFAULT_WINDOW, "tol": DEFAULT_TOL, "length": None},
    "audit": {},
    "moduli": {"bucket_width": 4.0, "min_buckets": 5, "max_distance": "radius"},
    "seed": 0,
    "workers": 1,
    "out": "glue-out",
}


# ---------------------------------------------------------------- config


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None, overrides: dict | None = None) -> tuple[dict, set]:
    """Defaults, then the config file, then non-None flag overrides.

    Also returns the set of keys given explicitly (file or flags).
    """
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    cfg = _merge(DEFAULTS, raw)
    given = set(raw)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
            given.add(k)
    return cfg, given


def check_config(cfg: dict, need_space: bool = True) -> dict:
    if need_space and not isinstance(cfg.get("space"), dict):
        raise ConfigError("config needs a 'space' object")
    try:
        NormSpec.of(cfg["p"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg['mode']!r}")
    sel = cfg["selection"]
    for key in ("horizon", "window"):
        if not isinstance(sel.get(key), int) or sel[key] < 1:
            raise ConfigError(f"selection.{key} must be a positive integer")
    if cfg["imax"] is not None and (not isinstance(cfg["imax"], int) or cfg["imax"] < 1):
        raise ConfigError("imax must be an integer >= 1")
    kind = cfg["chain"].get("kind")
    if kind not in SYNTHETIC:
        raise ConfigError(f"chain.kind must be one of {SYNTHETIC}, got {kind!r}")
    if kind == "jitter" and "seed" not in cfg["chain"] and cfg.get("seed") is None:
        raise ConfigError("jitter chains need a seed")
    try:
        au.AuditConstants.from_overrides(cfg["audit"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad audit constants: {exc}") from None
    if int(cfg.get("workers") or 1) < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def _clean(obj):
    """JSON-safe copy: tuples become lists, non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), indent=2) + "\n")


# -------------------------------------------------------------- pipeline


def build_net(cfg: dict, space) -> EmbeddedNet:
    ns = NormSpec.of(cfg["p"])
    method = cfg.get("net") or ("coarse" if cfg["mode"] == "coarse" else
                                "coords" if space.kind == "lattice" else "frechet")
    window = cfg["selection"]["window"]
    far = max(space.dist(space.basepoint, u) for u in space.ids)
    count = cfg["imax"] or shell_of(max(far, 1.0)) + window
    if method == "coords":
        return net_from_lattice(space, ns)
    if method == "frechet":
        if not math.isinf(ns.p):
            raise ConfigError("Frechet nets live in l_inf; set p to \"inf\"")
        return lift_space(space, frechet_pieces(space, count), C=1.0, ns=ns, window=window,
                          tol=cfg["selection"]["tol"])
    if method == "coarse":
        exponent = float(cfg["chain"].get("exponent", 0.5))
        return lift_space(space, frechet_pieces(space, count, exponent), C=None, ns=ns, window=window,
                          tol=cfg["selection"]["tol"])
    raise ConfigError(f"unknown net method {method!r}")


def build_chain(cfg: dict, net: EmbeddedNet) -> ScaleChain:
    ch = cfg["chain"]
    extra = {k: ch[k] for k in ("target", "decay", "jitter_dim", "blocksize") if k in ch}
    seed = int(ch.get("seed", cfg.get("seed") or 0))
    return synthetic_chain(net, ch["kind"], cfg["selection"]["horizon"], seed=seed, **extra)


class Pipeline:
    """All intermediate objects of one run, kept for serialisation."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.space = None
        self.net = None
        self.chain = None
        self.limits = None
        self.selected = None
        self.cert = None
        self.path = None

    def build(self):
        cfg = self.cfg
        self.space = space_from_config(cfg["space"])
        rep = validate_space(self.space)
        if not rep.ok:
            raise ConfigError(f"space is not a valid metric: {rep.violations[0]}")
        self.net = build_net(cfg, self.space)
        self.chain = build_chain(cfg, self.net)
        rep = validate_chain(self.chain, self.net)
        if not rep.ok:
            raise InvalidChain(f"chain fails validation: {rep.violations[0]}", rep)
        sel = cfg["selection"]
        self.limits = weak_limit(self.chain, self.net, sel["window"], sel["tol"])
        self.selected, self.cert = select_subsequence(self.chain, self.net, self.limits, length=sel.get("length"))
        self._verify()
        glued = GluedMap(self.selected, self.net)
        self.path = build_tau(glued, kmax=cfg["kmax"])
        return self

    def _verify(self):
        rep = verify_certificate(self.selected, self.net, self.limits, self.cert)
        if not rep.ok:
            raise InvalidChain(f"selection certificate does not verify: {rep.violations[0]}", rep)
        self.cert_report = rep

    def maps_json(self) -> dict:
        return {"config": self.cfg, "net": self.net.to_json(), "chain": self.selected.to_json(),
                "limits": self.limits.to_json(), "certificate": self.cert.to_json(), "tau": self.path.to_json()}

    @classmethod
    def from_maps(cls, obj: dict) -> "Pipeline":
        pipe = cls(obj["config"])
        pipe.net = EmbeddedNet.from_json(obj["net"])
        pipe.selected = ScaleChain.from_json(obj["chain"])
        pipe.limits = WeakLimitTable.from_json(obj["limits"])
        pipe.cert = SelectionCertificate.from_json(obj["certificate"])
        pipe.path = TauPath.from_json(obj["tau"])
        pipe._verify()
        return pipe


def run_audits(pipe: Pipeline, moduli: bool | None = None, cases: bool = True):
    """Audit the glued maps; returns (ok, summary dict, pair reports)."""
    cfg = pipe.cfg
    consts = au.AuditConstants.from_overrides(cfg["audit"])
    glued = GluedMap(pipe.selected, pipe.net)
    aug = AugmentedMap(glued)
    hat = HatMap(glued, pipe.path)
    net = pipe.net
    summary: dict = {"mode": cfg["mode"], "points": len(net), "pairs": len(net) * (len(net) - 1) // 2,
                     "survivors": pipe.cert.indices, "certificate": pipe.cert_report.to_json(),
                     "tau_dist_checks": pipe.path.dist_checks}
    ok = True
    reports = []
    if cases:
        d_tilde = au.distortion(aug.phi_tilde, net.ids, net.dist, au.one_sum_distance(glued.ns))
        d_hat = au.distortion(hat, net.ids, net.dist, ns=glued.ns)
        case = au.check_case_bounds(aug, pipe.limits, pipe.cert, consts, hat=hat, strict=False)
        tau = au.check_tau_bounds(hat, consts, strict=False)
        summary.update({"distortion_phi_tilde": d_tilde.to_json(), "distortion_phi_hat": d_hat.to_json(),
                        "case_audit": case.to_json(), "tau_audit": tau.to_json()})
        ok = case.ok and tau.ok and all(x == 1.0 for x in pipe.path.dist_checks)
        reports = case.reports
    if moduli if moduli is not None else cfg["mode"] == "coarse":
        space = pipe.space or space_from_config(cfg["space"])
        mcfg = cfg["moduli"]
        # net ids are the space ids, so the glued map is read directly against d_A
        limit = mcfg.get("max_distance", "radius")
        if limit == "radius":
            limit = max(space.dist(space.basepoint, u) for u in space.ids)
        mod = au.empirical_moduli(hat, net.ids, space.dist, float(mcfg["bucket_width"]), ns=glued.ns,
                                  max_distance=limit)
        enough = len(mod.counts) >= int(mcfg.get("min_buckets", 5))
        summary["moduli"] = {**mod.to_json(), "enough_buckets": enough}
        ok = ok and mod.strictly_increasing and mod.ordered and enough
    summary["ok"] = ok
    summary["verdict"] = "pass" if ok else "fail"
    return ok, summary, reports


# ---------------------------------------------------------- subcommands


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_reports(out: Path, command: str, summary: dict, reports, maps: dict | None = None):
    _dump(out / "summary.json", {"command": command, **summary})
    au.write_pairs_csv(reports, out / "pairs.csv")
    if maps is not None:
        _dump(out / "maps.json", maps)


def cmd_embed(cfg) -> int:
    check_config(cfg)
    pipe = Pipeline(cfg).build()
    ok, summary, reports = run_audits(pipe)
    out = _outdir(cfg)
    _write_reports(out, "embed", summary, reports, pipe.maps_json())
    _report_line(summary, out)
    return 0 if ok else 1


def cmd_audit(cfg, maps_path, given=frozenset()) -> int:
    if maps_path is None:
        maps_path = cfg.get("maps")
    if maps_path is None:
        raise ConfigError("audit needs --maps PATH (or a 'maps' entry in the config)")
    try:
        obj = json.loads(Path(maps_path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"maps file {maps_path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"maps file is not valid JSON: {exc}") from None
    stored = _merge(DEFAULTS, obj["config"])
    # audit constants, mode and output may be overridden; the maps themselves may not
    for key in ("audit", "mode", "out", "moduli", "workers"):
        if key in given:
            stored[key] = cfg[key]
    check_config(stored)
    obj["config"] = stored
    pipe = Pipeline.from_maps(obj)
    ok, summary, reports = run_audits(pipe)
    out = _outdir(stored)
    _write_reports(out, "audit", summary, reports)
    _report_line(summary, out)
    return 0 if ok else 1


def cmd_frechet(cfg) -> int:
    if "matrix" in cfg:
        space = from_matrix(cfg["matrix"])
    elif isinstance(cfg.get("space"), dict):
        space = space_from_config(cfg["space"])
    else:
        raise ConfigError("frechet needs a 'matrix' or a 'space' entry")
    rep = validate_space(space, samples=max(2000, len(space) ** 3))
    ids = list(space.ids)
    vecs = frechet_embed(ids, space.dist)
    img = pairwise_norms([vecs[u] for u in ids], NormSpec.of(math.inf))
    src = np.array([space.dist(u, v) for i, u in enumerate(ids) for v in ids[i + 1:]])
    rel = float(np.max(np.abs(img - src) / np.maximum(src, 1e-300))) if src.size else 0.0
    ok = rep.ok and rel <= 1e-12
    out = _outdir(cfg)
    summary = {"command": "frechet", "ok": ok, "verdict": "pass" if ok else "fail", "points": len(ids),
               "max_relative_error": rel, "space_check": rep.to_json(),
               "vectors": {str(u): v.to_json() for u, v in vecs.items()}}
    _dump(out / "summary.json", summary)
    _report_line(summary, out)
    return 0 if ok else 1


def cmd_moduli(cfg) -> int:
    cfg["mode"] = "coarse"
    check_config(cfg)
    pipe = Pipeline(cfg).build()
    ok, summary, _ = run_audits(pipe, moduli=True, cases=False)
    out = _outdir(cfg)
    _dump(out / "summary.json", {"command": "moduli", **summary})
    _report_line(summary, out)
    return 0 if ok else 1


def cmd_validate(cfg, given=frozenset()) -> int:
    check_config(cfg)
    space = space_from_config(cfg["space"])
    rep = validate_space(space, samples=int(cfg.get("samples", 2000)), seed=int(cfg.get("seed") or 0))
    summary = {"command": "validate", "space": rep.to_json()}
    ok = rep.ok
    if ok and "chain" in given:
        net = build_net(cfg, space)
        chain = build_chain(cfg, net)
        crep = validate_chain(chain, net)
        summary["chain"] = crep.to_json()
        ok = crep.ok
    summary["ok"] = ok
    summary["verdict"] = "pass" if ok else "fail"
    out = _outdir(cfg)
    _dump(out / "summary.json", summary)
    if not rep.ok:
        print(f"space violation: {json.dumps(_clean(rep.violations[0]))}")
    _report_line(summary, out)
    return 0 if ok else 1


def _report_line(summary: dict, out: Path):
    print(f"{summary['verdict']}: reports in {out}")


# ------------------------------------------------------------------ main


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--out", metavar="DIR", help="output directory (default from config, else ./glue-out)")
    common.add_argument("--workers", type=int, metavar="N", help="audit worker count (accepted, audits run in-process)")
    common.add_argument("--seed", type=int, metavar="N", help="seed for random chains and sampled checks")
    common.add_argument("--mode", choices=MODES, help="bilipschitz (default) or coarse")

    parser = argparse.ArgumentParser(prog="metricglue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("embed", parents=[common], help="run the full pipeline and audit it",
                   description="Build space, net and chain, select, glue, build tau, audit. "
                               "Writes summary.json, pairs.csv and maps.json.")
    p = sub.add_parser("audit", parents=[common], help="re-verify serialized maps",
                       description="Load maps.json from an earlier run, re-check the certificate and "
                                   "repeat every audit. Writes summary.json and pairs.csv.")
    p.add_argument("--maps", metavar="PATH", help="maps.json written by embed")
    sub.add_parser("frechet", parents=[common], help="embed a distance matrix into l_inf",
                   description="Config holds 'matrix' (square list) or a 'space'. Exit 1 if the input is "
                               "not a metric or the embedding is not isometric.")
    sub.add_parser("moduli", parents=[common], help="coarse pipeline, moduli buckets only",
                   description="Coarse mode pipeline reporting only the empirical moduli.")
    sub.add_parser("validate", parents=[common], help="space and chain checks only",
                   description="Metric axioms of the space, then the near-isometry bounds of the chain. "
                               "Exit 1 with the first violation.")
    return parser


def _setup_logging():
    level = os.environ.get("GLUE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    args = make_parser().parse_args(argv)
    try:
        flags = {"out": args.out, "workers": args.workers, "seed": args.seed, "mode": args.mode}
        cfg, given = load_config(args.config, flags)
        if args.command == "embed":
            code = cmd_embed(cfg)
        elif args.command == "audit":
            code = cmd_audit(cfg, args.maps, given)
        elif args.command == "frechet":
            code = cmd_frechet(cfg)
        elif args.command == "moduli":
            code = cmd_moduli(cfg)
        else:
            code = cmd_validate(cfg, given)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GlueError as exc:
        print(f"pipeline error [{exc.stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return code


if __name__ == "__main__":
    sys.exit(main())
