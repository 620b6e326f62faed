"""Command-line pipeline: train minima, optimize paths, score landscapes.

Configuration is a plain-text ``key = value`` file (``#`` starts a
comment). Unknown keys are rejected; file-path values resolve relative to
the config file. All randomness is seeded from the config, so every
command is deterministic given its inputs.

Exit codes: 0 success, 1 tolerance failure, 2 config/validation error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from statistics import median

from . import barcode as bc
from . import morse, oracle, pathopt, svgplot, trainer
from .errors import ConfigError, DatasetError, DivergenceError, LossTopoError
from .landscape import (BUILTIN_NAMES, MlpSpec, load_dataset, make_builtin,
                        make_mlp_field, two_moons)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _parse_int(v): return int(v)
def _parse_float(v): return float(v)
def _parse_str(v): return str(v)
def _parse_int_list(v): return [int(x) for x in str(v).split(",") if x.strip()]
def _parse_float_list(v): return [float(x) for x in str(v).split(",") if x.strip()]
def _parse_path(v): return v  # resolved against the config directory later


# key -> (parser, default); None defaults mean "not set"
CONFIG_KEYS = {
    "field": (_parse_str, "gaussian_mixture_2d"),
    "field_seed": (_parse_int, 0),
    "dataset": (_parse_path, None),
    "mlp_widths": (_parse_int_list, None),
    "mlp_activation": (_parse_str, "relu"),
    "seed": (_parse_int, 0),
    "out": (_parse_path, "."),
    "workers": (_parse_int, 1),
    # minima training
    "minima_count": (_parse_int, 10),
    "init_scale": (_parse_float, 1.8),
    "momentum": (_parse_float, 0.9),
    "max_steps": (_parse_int, 10000),
    "tol": (_parse_float, 1e-6),
    "train_m1": (_parse_float, 0.0),
    "train_m2": (_parse_float, 0.0),
    "train_lr_max": (_parse_float, 0.0),
    "train_lr_min": (_parse_float, 1e-2),
    "train_batches_per_epoch": (_parse_int, 1),
    # path optimization
    "path_points": (_parse_int, 19),
    "path_epochs": (_parse_int, 300),
    "path_m1": (_parse_float, None),
    "path_m2": (_parse_float, None),
    "path_lr_max": (_parse_float, 2e-3),
    "path_lr_min": (_parse_float, 1.25e-4),
    "path_l2": (_parse_float, 1e-5),
    "refine_every": (_parse_int, 25),
    "criterion": (_parse_str, "distance"),
    "alpha_grid": (_parse_float_list, [0.2, 0.4, 0.6, 0.8]),
    "prune_k": (_parse_int, None),
    # morse
    "r_max": (_parse_int, 2),
    "morse_epochs": (_parse_int, 100),
    "morse_grid_depth": (_parse_int, None),
    "morse_lr_max": (_parse_float, 2e-3),
    "morse_lr_min": (_parse_float, 1.25e-4),
    # oracle comparison
    "oracle_resolution": (_parse_int, 512),
    "compare_tolerance": (_parse_float, 0.05),
    # depth study
    "depths": (_parse_int_list, [2, 3, 4]),
    "width": (_parse_int, 16),
    "moons_n": (_parse_int, 400),
    "moons_noise": (_parse_float, 0.1),
    "minima_per_spec": (_parse_int, 5),
    # file inputs
    "minima_file": (_parse_path, None),
    "barcode_file": (_parse_path, None),
    "pair": (_parse_int_list, [0, 1]),
}

_PATH_KEYS = ("dataset", "minima_file", "barcode_file", "out")


def load_config(path: str | None) -> dict:
    """Parse a key = value config file against the known-key registry."""
    cfg = {k: default for k, (_, default) in CONFIG_KEYS.items()}
    if path is None:
        return cfg
    base = Path(path).resolve().parent
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    for ln, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError("unknown key", key=key)
        parser, _ = CONFIG_KEYS[key]
        try:
            cfg[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value '{value}': {exc}", key=key)
    for k in _PATH_KEYS:
        if cfg.get(k) is not None:
            cfg[k] = str((base / cfg[k]).resolve()) if path else cfg[k]
    return cfg


def build_field(cfg: dict):
    """Construct the configured scalar field plus a metadata description."""
    name = cfg["field"]
    if name in BUILTIN_NAMES:
        field = make_builtin(name, seed=cfg["field_seed"])
        return field, {"field": name, "field_seed": cfg["field_seed"]}
    if name == "mlp":
        if cfg["dataset"] is None:
            raise ConfigError("an MLP field needs a dataset file", key="dataset")
        if cfg["mlp_widths"] is None:
            raise ConfigError("an MLP field needs layer widths", key="mlp_widths")
        data = load_dataset(cfg["dataset"])
        spec = MlpSpec(tuple(cfg["mlp_widths"]), cfg["mlp_activation"])
        return make_mlp_field(spec, data), {"field": "mlp",
                                            "mlp_widths": cfg["mlp_widths"],
                                            "dataset": cfg["dataset"]}
    raise ConfigError(f"unknown field '{name}'", key="field")


def train_scheduler(cfg: dict) -> trainer.SchedulerSpec:
    return trainer.SchedulerSpec(m1=cfg["train_m1"], m2=cfg["train_m2"],
                                 lr_max=cfg["train_lr_max"], lr_min=cfg["train_lr_min"],
                                 batches_per_epoch=cfg["train_batches_per_epoch"])


def path_config(cfg: dict) -> pathopt.PathConfig:
    m1 = cfg["path_m1"] if cfg["path_m1"] is not None else 0.9 * cfg["path_epochs"]
    m2 = cfg["path_m2"] if cfg["path_m2"] is not None else cfg["path_epochs"]
    sched = trainer.SchedulerSpec(m1=m1, m2=m2, lr_max=cfg["path_lr_max"],
                                  lr_min=cfg["path_lr_min"])
    return pathopt.PathConfig(n_points=cfg["path_points"], epochs=cfg["path_epochs"],
                              scheduler=sched, l2=cfg["path_l2"],
                              refine_every=cfg["refine_every"],
                              criterion=cfg["criterion"],
                              alpha_grid=tuple(cfg["alpha_grid"]), seed=cfg["seed"])


def morse_config(cfg: dict) -> morse.SimplexConfig:
    sched = trainer.SchedulerSpec(m1=0.9 * cfg["morse_epochs"], m2=cfg["morse_epochs"],
                                  lr_max=cfg["morse_lr_max"], lr_min=cfg["morse_lr_min"])
    return morse.SimplexConfig(epochs=cfg["morse_epochs"], scheduler=sched,
                               grid_depth=cfg["morse_grid_depth"])


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sample_minima(cfg: dict, field):
    return trainer.sample_minima(field, count=cfg["minima_count"], seed=cfg["seed"],
                                 init_scale=cfg["init_scale"],
                                 scheduler=train_scheduler(cfg),
                                 momentum=cfg["momentum"],
                                 max_steps=cfg["max_steps"], tol=cfg["tol"])


def _load_minima_arg(cfg: dict, args):
    path = getattr(args, "minima", None) or cfg["minima_file"]
    if path is None:
        raise ConfigError("no minima file given", key="minima_file")
    return trainer.load_minima(path)


def cmd_minima(cfg: dict, args) -> int:
    if cfg["minima_count"] < 1:
        raise ConfigError("minima_count must be >= 1", key="minima_count")
    field, _ = build_field(cfg)
    minima = _sample_minima(cfg, field)
    out = _out_dir(cfg)
    trainer.save_minima(minima, out / "minima.json")
    losses = [m.loss for m in minima]
    print(f"wrote {len(minima)} minima to {out / 'minima.json'}")
    print(f"loss range [{min(losses):.6g}, {max(losses):.6g}], "
          f"converged {sum(m.converged for m in minima)}/{len(minima)}")
    return EXIT_OK


def cmd_path(cfg: dict, args) -> int:
    field, _ = build_field(cfg)
    minima = _load_minima_arg(cfg, args)
    i, j = (args.pair if args.pair else cfg["pair"])[:2]
    if not (0 <= i < len(minima) and 0 <= j < len(minima)):
        raise ConfigError(f"pair {i},{j} out of range for {len(minima)} minima")
    path, trace = pathopt.optimize_path(field, minima[i], minima[j], path_config(cfg))
    out = _out_dir(cfg)
    pathopt.save_path(path, out / "path.json")
    pathopt.save_trace(trace, out / "trace.csv")
    val, loc = pathopt.path_max_loss(field, path, tuple(cfg["alpha_grid"]))
    print(f"path {i} -> {j}: max interpolated loss {val:.6g} "
          f"at segment {loc[0]}, alpha {loc[1]}")
    return EXIT_OK


def _barcode_meta(cfg: dict, desc: dict) -> dict:
    pc = path_config(cfg)
    return {**desc, "seed": cfg["seed"],
            "path_config": {"n_points": pc.n_points, "epochs": pc.epochs,
                            "lr_max": pc.scheduler.lr_max, "lr_min": pc.scheduler.lr_min,
                            "l2": pc.l2, "refine_every": pc.refine_every,
                            "criterion": pc.criterion,
                            "alpha_grid": list(pc.alpha_grid)}}


def cmd_barcode(cfg: dict, args) -> int:
    field, desc = build_field(cfg)
    if getattr(args, "minima", None) or cfg["minima_file"]:
        minima = _load_minima_arg(cfg, args)
    else:
        minima = _sample_minima(cfg, field)
    code = bc.compute_barcode(minima, field, path_config(cfg),
                              prune_k=cfg["prune_k"], workers=cfg["workers"])
    code.meta.update(_barcode_meta(cfg, desc))
    out = _out_dir(cfg)
    bc.save_barcode(code, out / "barcode.json")
    svgplot.save_svg(svgplot.barcode_svg(code, title=desc["field"]),
                     out / "barcode.svg")
    print(f"wrote barcode with {len(code.segments)} finite segments to "
          f"{out / 'barcode.json'}")
    print(f"to-score {bc.to_score(code):.6f}")
    return EXIT_OK


def cmd_toscore(cfg: dict, args) -> int:
    try:
        code = bc.load_barcode(args.barcode)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid barcode file: {exc}")
    score = bc.to_score(code)
    print(f"{score:.6f}")
    out = _out_dir(cfg)
    with open(out / "toscore.json", "w", encoding="utf-8") as fh:
        json.dump({"to_score": score}, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def cmd_morse(cfg: dict, args) -> int:
    field, desc = build_field(cfg)
    if getattr(args, "minima", None) or cfg["minima_file"]:
        minima = _load_minima_arg(cfg, args)
    else:
        minima = _sample_minima(cfg, field)
    cx = morse.build_complex(minima, field, cfg["r_max"], morse_config(cfg))
    diagrams = morse.reduce_complex(cx)
    payload = {"diagrams": [], "meta": {**desc, "seed": cfg["seed"],
                                        "r_max": cfg["r_max"],
                                        "clamp_count": cx.clamp_count}}
    for dim, dg in enumerate(diagrams):
        payload["diagrams"].append({
            "dimension": dim,
            "essential_births": [float(b) for b in dg.essential_births],
            "points": [{"birth": b, "death": d} for b, d in dg.finite_points],
            "to_score": morse.index_r_to_score(diagrams, dim),
        })
    out = _out_dir(cfg)
    with open(out / "morse.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    for entry in payload["diagrams"]:
        print(f"dim {entry['dimension']}: {len(entry['points'])} bars, "
              f"score {entry['to_score']:.6f}")
    return EXIT_OK


def cmd_compare(cfg: dict, args) -> int:
    name = cfg["field"]
    if name not in BUILTIN_NAMES:
        raise ConfigError("compare needs a builtin 1D/2D field", key="field")
    field, desc = build_field(cfg)
    minima = _sample_minima(cfg, field)
    code = bc.compute_barcode(minima, field, path_config(cfg),
                              workers=cfg["workers"])
    pipeline = bc.to_diagram(code)
    grid = oracle.grid_sample(field, field.default_box, cfg["oracle_resolution"])
    truth = oracle.sublevel_persistence(grid, max_dim=0)[0]
    dist = bc.bottleneck_distance(pipeline, truth)
    tol = cfg["compare_tolerance"]
    verdict = "PASS" if dist < tol else "FAIL"
    print(f"{desc['field']}: bottleneck distance to grid oracle = {dist:.6g} "
          f"({verdict}, tolerance {tol})")
    return EXIT_OK if dist < tol else EXIT_TOLERANCE


def cmd_depth_study(cfg: dict, args) -> int:
    data = two_moons(cfg["moons_n"], cfg["moons_noise"], seed=cfg["seed"])
    out = _out_dir(cfg)
    rows, stacks, medians = [], [], {}
    for depth in cfg["depths"]:
        widths = (2, *([cfg["width"]] * depth), 2)
        field = make_mlp_field(MlpSpec(widths, cfg["mlp_activation"]), data)
        sub = dict(cfg)
        sub["seed"] = cfg["seed"] + 1000 * depth
        minima = _sample_minima(sub, field)
        code = bc.compute_barcode(minima, field, path_config(sub),
                                  workers=cfg["workers"])
        label = f"depth{depth}"
        stacks.append((label, code))
        rows.append((label, code.essential.minimum_id, code.essential.birth, math.inf))
        rows.extend((label, s.minimum_id, s.birth, s.death) for s in code.segments)
        deaths = [s.death for s in code.segments]
        medians[depth] = median(deaths) if deaths else 0.0
    with open(out / "depth_study.csv", "w", encoding="utf-8") as fh:
        fh.write("spec,minimum_id,birth,death\n")
        for label, mid, birth, death in rows:
            dstr = "inf" if math.isinf(death) else repr(float(death))
            fh.write(f"{label},{mid},{repr(float(birth))},{dstr}\n")
    svgplot.save_svg(svgplot.stacked_barcode_svg(stacks, title="barcodes by depth"),
                     out / "depth_study.svg")
    for depth in cfg["depths"]:
        print(f"depth {depth}: median finite death {medians[depth]:.6g}")
    return EXIT_OK


def cmd_plot(cfg: dict, args) -> int:
    try:
        code = bc.load_barcode(args.barcode)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid barcode file: {exc}")
    out = _out_dir(cfg)
    svgplot.save_svg(svgplot.barcode_svg(code), out / "barcode.svg")
    print(f"wrote {out / 'barcode.svg'}")
    return EXIT_OK


COMMANDS = {
    "minima": cmd_minima,
    "path": cmd_path,
    "barcode": cmd_barcode,
    "toscore": cmd_toscore,
    "morse": cmd_morse,
    "compare": cmd_compare,
    "depth-study": cmd_depth_study,
    "plot": cmd_plot,
}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--seed", type=int, help="seed override")
    common.add_argument("--workers", type=int, help="worker pool size")

    parser = argparse.ArgumentParser(prog="losstopo",
                                     description="loss-landscape barcodes and scores")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("minima", "barcode", "morse", "compare", "depth-study"):
        sp = sub.add_parser(name, parents=[common])
        if name in ("barcode", "morse"):
            sp.add_argument("--minima", help="minima JSON file")
    sp = sub.add_parser("path", parents=[common])
    sp.add_argument("--minima", help="minima JSON file")
    sp.add_argument("--pair", type=_parse_int_list, help="minimum indices i,j")
    for name in ("toscore", "plot"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("barcode", help="barcode JSON file")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg["out"] = args.out
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.workers is not None:
            cfg["workers"] = args.workers
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except LossTopoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
