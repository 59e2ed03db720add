"""Command-line experiment runner.

Usage: ``oamtopo {topology,se,surface,ber,optimize,switchcost} [--config PATH]
[--seed N] [--out DIR] [--format csv|json]``. A config is a JSON document; any
field left out falls back to the reference link parameters. ``--config`` also
accepts the name of a bundled config (``fig7`` ... ``fig11``, ``alg1``).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import copy
import hashlib
import json
import os
import re
import sys
import tempfile
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np

from . import __version__
from .channel import LinkConfig, Method
from .errors import ConfigError, GeometryError, NumericError, SingularMatrixError, DomainError
from .geometry import (Family, FucaSpec, RingSpec, build_auxiliary, build_cuca, build_fuca,
                       build_uca, cuca_rings, positions_csv, topology_to_dict, uniform_radii)
from .metrics import ber_monte_carlo, se_surface, se_vs_snr, surface_csv, sweep_csv, sweep_json
from .optimizer import OptimizerConfig, alternating_optimize
from .reconfig import catalog_for_budget, cost_matrix, figure_catalog, heatmap_csv
from .transceiver import TransceiverPlan

COMMANDS = ("topology", "se", "surface", "ber", "optimize", "switchcost")
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


@dataclass
class ExperimentConfig:
    link: LinkConfig = field(default_factory=LinkConfig)
    topologies: list = field(default_factory=list)
    snr_db: list = field(default_factory=lambda: [0, 5, 10, 15, 20, 25, 30])
    distances: list = field(default_factory=list)
    radii: list = field(default_factory=list)
    frames: int = 10_000
    seed: int = 0
    constellation: str = "qpsk"
    method: Method = Method.DISCRETE
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    out_dir: str = "out"
    fmt: str = "csv"
    name: str = ""
    raw: dict = field(default_factory=dict)

    def digest(self):
        """SHA-256 of the resolved config; the output directory does not count."""
        doc = copy.deepcopy(self.raw)
        doc.get("output", {}).pop("dir", None)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _bundled(name):
    return resources.files("oamtopo") / "configs" / f"{name}.json"


def load_document(path):
    """Read a JSON config from a file path or a bundled config name."""
    if path is None:
        return {}
    if not os.path.exists(path) and re.fullmatch(r"[A-Za-z0-9_]+", path):
        candidate = _bundled(path)
        if candidate.is_file():
            return json.loads(candidate.read_text())
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None


def _number_list(doc, key):
    value = doc.get(key, [])
    if isinstance(value, dict):
        start, stop, step = value["start"], value["stop"], value["step"]
        n = int(round((stop - start) / step)) + 1
        value = [round(start + i * step, 10) for i in range(n)]
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
        raise ConfigError(f"{key} must be a list of numbers or a {{start, stop, step}} range")
    return [float(v) for v in value]


def parse_config(doc, overrides=None):
    """Validate a config document (plus CLI overrides) into an ExperimentConfig."""
    doc = copy.deepcopy(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            section, _, leaf = key.partition(".")
            doc.setdefault(section, {})[leaf] = value
    link_doc = doc.get("link", {})
    known = {f.name for f in fields(LinkConfig)}
    unknown = set(link_doc) - known
    if unknown:
        raise ConfigError(f"unknown link fields: {sorted(unknown)}")
    try:
        link = LinkConfig(**link_doc)
    except (TypeError, DomainError) as exc:
        raise ConfigError(f"invalid link parameters: {exc}") from None

    sweep = doc.get("sweep", {})
    mc = doc.get("monte_carlo", {})
    out = doc.get("output", {})
    opt_doc = dict(doc.get("optimizer", {}))
    try:
        method = Method(str(doc.get("method", "DISCRETE")).upper())
        if "method" in opt_doc:
            opt_doc["method"] = Method(str(opt_doc["method"]).upper())
        opt_doc.setdefault("aperture", link.aperture)
        optimizer = OptimizerConfig(**opt_doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid optimizer/method settings: {exc}") from None

    cfg = ExperimentConfig(
        link=link,
        topologies=list(doc.get("topologies", [])),
        snr_db=_number_list(sweep, "snr_db") if "snr_db" in sweep else [0, 5, 10, 15, 20, 25, 30],
        distances=_number_list(sweep, "distance_m"),
        radii=_number_list(sweep, "radius_m"),
        frames=int(mc.get("frames", 10_000)),
        seed=int(mc.get("seed", 0)),
        constellation=str(mc.get("constellation", "qpsk")).lower(),
        method=method,
        optimizer=optimizer,
        out_dir=str(out.get("dir", "out")),
        fmt=str(out.get("format", "csv")).lower(),
        name=str(out.get("name", "")),
        raw=doc,
    )
    if cfg.fmt not in ("csv", "json"):
        raise ConfigError(f"output format must be csv or json, got {cfg.fmt!r}")
    if cfg.frames < 1:
        raise ConfigError("monte_carlo.frames must be >= 1")
    if cfg.constellation not in ("qpsk", "16qam"):
        raise ConfigError(f"unknown constellation {cfg.constellation!r}")
    for spec in cfg.topologies:
        if not isinstance(spec, dict):
            raise ConfigError(f"topology entries must be objects, got {spec!r}")
    return cfg


# -- topology specs ----------------------------------------------------------

def _radii_for(spec, aperture):
    N = int(spec.get("rings", 1))
    radii = spec.get("radii")
    if radii is None:
        return uniform_radii(N, aperture)
    if len(radii) != N:
        raise ConfigError(f"{N} rings but {len(radii)} radii given")
    return [float(r) for r in radii]


def build_from_spec(spec, link, aperture=None):
    """Build every topology described by one config entry (a list)."""
    aperture = link.aperture if aperture is None else aperture
    spacing = link.spacing
    try:
        if spec.get("figure_catalog"):
            return figure_catalog(aperture, spacing)
        if spec.get("catalog"):
            return catalog_for_budget(int(spec.get("budget", 16)), aperture,
                                      exact=bool(spec.get("exact", True)), min_spacing=spacing)
        name = str(spec["family"]).upper()
        family = Family("QFUCA_LAYOUT" if name == "QFUCA" else name)
        if family is Family.UCA:
            return [build_uca(int(spec["k"]), float(spec.get("radius", aperture)),
                              float(spec.get("sigma", 0.0)), min_spacing=spacing)]
        if family is Family.CUCA:
            rings = cuca_rings(_radii_for(spec, aperture), int(spec["k"]), float(spec.get("sigma", 0.0)))
            return [build_cuca(rings, min_spacing=spacing)]
        if family is Family.FUCA:
            secondary = float(spec.get("secondary", 0.4 * aperture))
            primary = float(spec.get("primary", aperture - secondary))
            fs = FucaSpec(int(spec["n"]), int(spec["k"]), primary, secondary,
                          float(spec.get("sigma", 0.0)))
            return [build_fuca(fs, min_spacing=spacing)]
        return [build_auxiliary(family, int(spec["count"]), aperture, arms=spec.get("arms"),
                                min_spacing=spacing)]
    except KeyError as exc:
        raise ConfigError(f"topology spec {spec} is missing {exc}") from None
    except ValueError as exc:
        if isinstance(exc, (GeometryError, ConfigError)):
            raise
        raise ConfigError(f"bad topology spec {spec}: {exc}") from None


def scaled_builder(spec, link):
    """``aperture -> topology`` with radii scaled in proportion to the aperture."""
    base = link.aperture

    def build(aperture):
        s = dict(spec)
        k = aperture / base
        for key in ("radius", "primary", "secondary"):
            if key in s:
                s[key] = s[key] * k
        if "radii" in s:
            s["radii"] = [r * k for r in s["radii"]]
        return build_from_spec(s, link, aperture)[0]

    return build


def build_all(cfg):
    tops = []
    for spec in cfg.topologies:
        tops.extend(build_from_spec(spec, cfg.link))
    return tops


# -- output ------------------------------------------------------------------

def _header(cfg, command):
    return f"# oamtopo {__version__} command={command} config_sha256={cfg.digest()} seed={cfg.seed}\n"


def _meta(cfg, command):
    return {"tool": f"oamtopo {__version__}", "command": command,
            "config_sha256": cfg.digest(), "seed": cfg.seed}


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg, command, csv_text, json_obj, stem=None):
    stem = stem or cfg.name or command
    if cfg.fmt == "json":
        path = os.path.join(cfg.out_dir, f"{stem}.json")
        doc = dict(json_obj)
        doc["meta"] = {**doc.get("meta", {}), **_meta(cfg, command)}
        atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        path = os.path.join(cfg.out_dir, f"{stem}.csv")
        atomic_write(path, _header(cfg, command) + csv_text)
    return path


def _slug(label):
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_").lower()


# -- commands ----------------------------------------------------------------

def cmd_topology(cfg):
    tops = build_all(cfg)
    if not tops:
        raise ConfigError("no topologies selected")
    paths = []
    for top in tops:
        doc = topology_to_dict(top, cfg.link.spacing)
        paths.append(_emit(cfg, "topology", positions_csv(top), {"topology": doc},
                           stem=_slug(top.label)))
    return paths


def cmd_se(cfg):
    if not cfg.snr_db:
        raise ConfigError("sweep.snr_db is empty")
    tops = build_all(cfg)
    results = se_vs_snr(tops, cfg.link, cfg.snr_db, cfg.method)
    return [_emit(cfg, "se", sweep_csv(results), sweep_json(results, cfg.seed, cfg.link))]


def cmd_surface(cfg):
    if not cfg.distances or not cfg.radii:
        raise ConfigError("surface needs sweep.distance_m and sweep.radius_m")
    paths = []
    for spec in cfg.topologies:
        try:
            surf = se_surface(scaled_builder(spec, cfg.link), cfg.link, cfg.distances, cfg.radii,
                              method=cfg.method)
        except ValueError as exc:
            if isinstance(exc, (GeometryError, ConfigError, DomainError)):
                raise
            raise ConfigError(str(exc)) from None
        doc = {"surface": {"topology": surf.label, "d_m": surf.distances, "r_m": surf.radii,
                           "se_bps": surf.values.tolist()}}
        stem = f"{cfg.name or 'surface'}_{_slug(surf.label)}"
        paths.append(_emit(cfg, "surface", surface_csv(surf), doc, stem=stem))
    return paths


def cmd_ber(cfg):
    if not cfg.snr_db:
        raise ConfigError("sweep.snr_db is empty")
    results = []
    for top in build_all(cfg):
        plan = TransceiverPlan.for_link(top, top, cfg.link)
        results.append(ber_monte_carlo(top, top, cfg.link, plan, cfg.snr_db, cfg.frames,
                                       cfg.seed, cfg.constellation, cfg.method))
    return [_emit(cfg, "ber", sweep_csv(results), sweep_json(results, cfg.seed, cfg.link))]


def cmd_optimize(cfg):
    res = alternating_optimize(cfg.optimizer, cfg.link)
    doc = res.to_dict()
    doc["seed"] = cfg.seed
    doc["cfg"] = {"link": cfg.link.to_dict(),
                  "optimizer": {k: (v.value if hasattr(v, "value") else v)
                                for k, v in cfg.optimizer.__dict__.items()}}
    lines = ["iteration,family,candidates,capacity_bps,N,K,radii"]
    for t in res.trace:
        radii = " ".join(f"{r:.6g}" for r in t.params["radii"])
        lines.append(f"{t.iteration},{t.family},{t.candidates},{t.capacity:.12e},"
                     f"{t.params['N']},{t.params['K']},{radii}")
    best = " ".join(f"{r:.6g}" for r in res.params.radii)
    lines.append(f"best,{res.params.family.value},,{res.capacity:.12e},"
                 f"{res.params.ring_count},{res.params.elements_per_ring},{best}")
    return [_emit(cfg, "optimize", "\n".join(lines) + "\n", {"result": doc})]


def cmd_switchcost(cfg):
    tops = build_all(cfg) or figure_catalog(cfg.link.aperture, cfg.link.spacing)
    cm = cost_matrix(tops)
    return [_emit(cfg, "switchcost", heatmap_csv(cm), {"heatmap": cm.to_dict()})]


HANDLERS = {
    "topology": cmd_topology, "se": cmd_se, "surface": cmd_surface,
    "ber": cmd_ber, "optimize": cmd_optimize, "switchcost": cmd_switchcost,
}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file or bundled config name")
    common.add_argument("--seed", type=int, help="Monte-Carlo seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")

    parser = argparse.ArgumentParser(prog="oamtopo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"oamtopo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "topology":
            p.add_argument("--catalog", action="store_true", help="export the whole catalog")
            p.add_argument("--budget", type=int, help="element budget for --catalog")
            p.add_argument("--family", help="uca, cuca, fuca, ura, rla, spiral, qfuca_layout")
            p.add_argument("--rings", type=int)
            p.add_argument("--k", type=int, help="elements per ring / sub-UCA")
            p.add_argument("--radii", help="comma-separated ring radii in metres")
            p.add_argument("--count", type=int, help="element count of an auxiliary layout")
    return parser


def _topology_overrides(args, doc):
    if args.catalog:
        doc["topologies"] = [{"catalog": True, "budget": args.budget or 16, "exact": True}]
    elif args.family:
        spec = {"family": args.family}
        if args.rings is not None:
            spec["rings"] = args.rings
            spec["n"] = args.rings
        if args.k is not None:
            spec["k"] = args.k
        if args.count is not None:
            spec["count"] = args.count
        if args.radii:
            try:
                spec["radii"] = [float(x) for x in args.radii.split(",")]
            except ValueError:
                raise ConfigError(f"cannot parse radii {args.radii!r}") from None
        doc["topologies"] = [spec]


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        doc = load_document(args.config)
        if args.command == "topology":
            _topology_overrides(args, doc)
        cfg = parse_config(doc, {"monte_carlo.seed": args.seed, "output.dir": args.out,
                                 "output.format": args.format})
        paths = HANDLERS[args.command](cfg)
    except (ConfigError, GeometryError, DomainError) as exc:
        print(f"oamtopo {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularMatrixError, NumericError, np.linalg.LinAlgError) as exc:
        print(f"oamtopo {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
