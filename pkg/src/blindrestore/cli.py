"""Command-line front end: ``restore``, ``synth`` and ``ablate``.

Exit statuses: 0 success, 1 usage or configuration error, 2 I/O error,
3 sampling diverged.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, rng
from .config import ExperimentConfig
from .degradation import save_model
from .errors import BlindRestoreError, ConfigurationError, DimensionError
from .experiments import run_ablation
from .images import from_uint8, read_image, to_uint8, write_image
from .metrics import evaluate, write_report
from .sampler import FailedRun, restore_batch
from .scenes import draw_from_prior
from .synth import degrade, operator_from_dict, operator_to_dict

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_DIVERGED = 3

TRACE_COLUMNS = ["t", "loss", "s", "kernel_mean", "mask_mean"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="blindrestore", description="Blind image restoration by guided reverse diffusion.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("restore", "restore degraded images"),
        ("synth", "fabricate a degraded suite"),
        ("ablate", "run the dynamic-update grid and kernel-size sweep"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
        sp.add_argument("--seed", type=int, default=None, help="override the sampler seed")
        sp.add_argument("--trace-every", type=int, default=None, help="record every N-th step")
    return p


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_trace(path: Path, traces) -> None:
    with_ref = any(tr.ref_mse is not None for tr in traces)
    cols = TRACE_COLUMNS + (["ref_mse"] if with_ref else [])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for tr in traces:
            w.writerow([_fmt(getattr(tr, c)) for c in cols])


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.trace_every is not None:
        over["trace_every"] = args.trace_every
    if over:
        cfg = dataclasses.replace(cfg, sampler=dataclasses.replace(cfg.sampler, **over))
    if args.jobs < 1:
        raise ConfigurationError("--jobs must be >= 1")
    return cfg


def _display_path(p, cfg: ExperimentConfig) -> str:
    # relative to the config file, so reports do not depend on where the tree lives
    try:
        return Path(p).resolve().relative_to(Path(cfg.base_dir).resolve()).as_posix()
    except ValueError:
        return str(p)


def _require_files(paths) -> None:
    # all inputs are validated before any sampling starts
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(f"input file not found: {p}")


def _suite_pairs(cfg: ExperimentConfig):
    """(degraded paths, clean paths or None, per-image operators or None)."""
    if cfg.suite is not None:
        manifest_path = cfg.path(cfg.suite)
        if not manifest_path.is_file():
            raise FileNotFoundError(f"suite manifest not found: {manifest_path}")
        doc = json.loads(manifest_path.read_text())
        base = manifest_path.parent
        op = operator_from_dict(doc["operator"], base)
        ys = [base / p["degraded"] for p in doc["pairs"]]
        xs = [base / p["clean"] for p in doc["pairs"]]
        seeds = [p["seed"] for p in doc["pairs"]]
        return ys, xs, [(op, s) for s in seeds]
    if not cfg.inputs:
        raise ConfigurationError("need 'inputs' or 'suite'")
    ys = [cfg.path(p) for p in cfg.inputs]
    xs = None if cfg.references is None else [cfg.path(p) for p in cfg.references]
    op = cfg.operator()
    return ys, xs, None if op is None else [(op, 0) for _ in ys]


def _load_images(paths, shape):
    out = []
    for p in paths:
        img = read_image(p)
        if shape is not None and img.shape != tuple(shape):
            raise DimensionError(f"{p}: image shape {img.shape} does not match prior shape {tuple(shape)}")
        out.append(img)
    return out


def cmd_restore(cfg: ExperimentConfig, jobs: int) -> int:
    ys_paths, xs_paths, ops = _suite_pairs(cfg)
    _require_files(ys_paths + (xs_paths or []))
    prior = cfg.build_prior()
    ys = _load_images(ys_paths, prior.shape)
    xs = None if xs_paths is None else _load_images(xs_paths, prior.shape)
    out = cfg.path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_dict())

    runs = restore_batch(ys, prior, cfg.sampler, parallelism=jobs, references=xs)
    reports = {}
    diverged = []
    for i, (run, y_path) in enumerate(zip(runs, ys_paths)):
        stem = f"{i:03d}"
        meta = {
            "index": i,
            "input": _display_path(y_path, cfg),
            "seed": (cfg.sampler.seed + i) % 2**64,
            "generator": rng.GENERATOR_NAME,
            "sampler": cfg.sampler.to_dict(),
        }
        if isinstance(run, FailedRun):
            meta.update(status="diverged" if run.step is not None else "failed", error=run.error, step=run.step)
            _write_json(out / f"run_{stem}.json", meta)
            diverged.append((y_path, run))
            continue
        write_image(out / f"restored_{stem}{Path(y_path).suffix.lower()}", run.exported_image())
        _write_trace(out / f"trace_{stem}.csv", run.traces)
        if cfg.save_models:
            save_model(run.model, out / f"model_{stem}")
        meta.update(
            status="ok",
            steps=len(run.traces),
            final_loss=run.traces[-1].loss if run.traces else None,
            final_scale=run.traces[-1].s if run.traces else None,
        )
        _write_json(out / f"run_{stem}.json", meta)
        if xs is not None:
            op, seed = ops[i] if ops is not None else (None, 0)
            reports[Path(y_path).name] = evaluate(run.exported_image(), xs[i], ys[i] if op else None, op, seed)
    if reports:
        write_report(out / "metrics.json", reports)
    for y_path, run in diverged:
        print(f"error: image {_display_path(y_path, cfg)}: {run.error}", file=sys.stderr)
    if any(r.step is not None for _, r in diverged):
        return EXIT_DIVERGED
    return EXIT_CONFIG if diverged else EXIT_OK


def cmd_synth(cfg: ExperimentConfig, jobs: int) -> int:
    op = cfg.operator()
    if op is None:
        raise ConfigurationError("synth needs a concrete 'task' operator")
    seed = cfg.sampler.seed
    if cfg.draw is not None:
        prior = cfg.build_prior()
        base = int(cfg.draw.get("seed", seed))
        k = len(prior.weights)
        clean = [draw_from_prior(prior, i % k, base + i) for i in range(int(cfg.draw["count"]))]
        names = [f"clean_{i:03d}.png" for i in range(len(clean))]
    else:
        if not cfg.clean:
            raise ConfigurationError("synth needs 'clean' images or a 'draw' block")
        paths = [cfg.path(p) for p in cfg.clean]
        _require_files(paths)
        clean = _load_images(paths, None)
        names = [f"clean_{i:03d}{p.suffix.lower()}" for i, p in enumerate(paths)]
    out = cfg.path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = []
    for i, (x, name) in enumerate(zip(clean, names)):
        # degrade what is actually stored, so the written pair is consistent
        x = from_uint8(to_uint8(x))
        y = degrade(op, x, seed + i)
        yname = "degraded_" + name[len("clean_"):]
        write_image(out / name, x)
        write_image(out / yname, y)
        pairs.append({"index": i, "clean": name, "degraded": yname, "seed": seed + i})
    opdoc = operator_to_dict(op)
    _write_json(out / "operator.json", opdoc)
    _write_json(out / "manifest.json", {"operator": opdoc, "seed": seed, "pairs": pairs})
    return EXIT_OK


def cmd_ablate(cfg: ExperimentConfig, jobs: int) -> int:
    ys_paths, xs_paths, _ = _suite_pairs(cfg)
    if xs_paths is None:
        raise ConfigurationError("ablate needs clean references (a suite or 'references')")
    _require_files(ys_paths + xs_paths)
    prior = cfg.build_prior()
    ys = _load_images(ys_paths, prior.shape)
    xs = _load_images(xs_paths, prior.shape)
    out = cfg.path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_ablation(prior, xs, ys, cfg.sampler, kernel_sizes=cfg.kernel_sizes, jobs=jobs)
    cols = list(rows[0].as_csv()) + ["delta_psnr_prev"]
    with (out / "ablation.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        prev = None
        for row in rows:
            d = row.as_csv()
            sweep = row.model.startswith("full_k")
            d["delta_psnr_prev"] = "" if not sweep or prev is None else _fmt(row.psnr - prev)
            prev = row.psnr if sweep else prev
            w.writerow([_fmt(d[c]) if c != "delta_psnr_prev" else d[c] for c in cols])
    _write_json(out / "config.json", cfg.to_dict())
    return EXIT_OK


COMMANDS = {"restore": cmd_restore, "synth": cmd_synth, "ablate": cmd_ablate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _apply_overrides(ExperimentConfig.load(args.config), args)
        return COMMANDS[args.command](cfg, args.jobs)
    except (BlindRestoreError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
