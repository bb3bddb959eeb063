"""``beamvq`` command line: gen-data, train, predict, eval, ablate.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .beam import BeamConfig, beam_forecast, count_states
from .config import ExperimentConfig
from .data.field import Dataset, FieldTensor, Provenance, SampleWindow
from .data.io import load_dataset, save_dataset
from .data.windows import compute_stats, denormalize, normalize, normalize_array
from .errors import ConfigError, DataError, NumericError
from .experiment import (ABLATIONS, SPLITS, VARIANTS, ensure_dir, evaluate_forecasts, forecast, generate_splits,
                         resolve_variant, run_variant, write_rows)
from .metrics.physics import SpectrumCurve, energy_spectrum
from .metrics.report import leadtime_curves
from .metrics.score import ScoreConfig
from .model_io import load_model, save_model
from .training import reference_spectrum, scorer_for

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _model_meta(cfg: ExperimentConfig, train: Dataset, stats, variant: str, seed: int) -> dict:
    # the climatological spectrum travels with the checkpoint so inference never needs truth
    ref = reference_spectrum(train, stats)
    return {"config_hash": cfg.hash(), "variant": variant, "seed": seed,
            "reference_spectrum": {"k": ref.k.tolist(), "energy": ref.energy.tolist()}}


def _load_config(args) -> ExperimentConfig:
    return ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig.defaults()


def _thread_limit(n: int | None):
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


# -- commands ------------------------------------------------------------------------
def cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    if args.seed is not None:
        cfg = cfg.override("data", "seeds", tuple(s + args.seed for s in cfg["data"]["seeds"]))
    out = ensure_dir(args.out, args.force)
    raw, drift = generate_splits(cfg.data())
    files = {}
    for k in SPLITS:
        path = out / f"{k}.bvqd"
        save_dataset(path, raw[k])
        files[k] = {"file": path.name, "samples": len(raw[k]), "sha256": _sha256(path)}
    _write_json(out / "manifest.json", {"config_hash": cfg.hash(), "config": cfg.to_dict(), "splits": files,
                                        "max_volume_drift": max(drift)})
    print(f"volume conservation: max relative drift {max(drift):.3e} over {len(drift)} trajectories")
    for k in SPLITS:
        print(f"{k}: {files[k]['samples']} windows -> {out / files[k]['file']}")
    return EXIT_OK


def _load_splits(cfg: ExperimentConfig, data_dir) -> dict[str, Dataset]:
    if data_dir is None:
        raw, _ = generate_splits(cfg.data())
        return raw
    d = Path(data_dir)
    return {k: load_dataset(d / f"{k}.bvqd") for k in SPLITS}


def cmd_train(args) -> int:
    cfg = _load_config(args)
    variant = resolve_variant(args.variant, cfg["beam"]["width"], cfg["beam"]["scorer"]) if args.variant else replace(
        VARIANTS["beamvq"], quantize=cfg["model"]["quantize"], self_training=cfg["train"]["self_training"],
        gen_width=cfg["beam"]["width"], infer_width=cfg["beam"]["width"], gen_scorer=cfg["beam"]["scorer"],
        infer_scorer=cfg["beam"]["scorer"], name="config")
    out = ensure_dir(args.out, args.force)
    raw = _load_splits(cfg, args.data)
    stats = compute_stats(raw["train"])
    splits = {k: normalize(v, stats) for k, v in raw.items()}
    seed = cfg["train"]["seed"] if args.seed is None else args.seed
    tc = cfg.train()
    tc.scorer = cfg.scorer()
    report, model = run_variant(variant, splits, stats, cfg.backbone(), tc, cfg["bank"]["size"], seed, out,
                                eval_max=cfg["experiment"]["eval_max"] or None, verbose=args.verbose)
    report.config_hash = cfg.hash()
    save_model(out / "model.bvqp", model, stats, _model_meta(cfg, splits["train"], stats, variant.name, seed))
    _write_json(out / "report.json", report.row())
    (out / "config.ini").write_text(cfg.to_ini())
    print(f"trained {variant.name} (seed {seed}); best epoch {report.best_epoch}; test mse {report.metrics.mse:.6g}")
    return EXIT_OK


def _inputs_from(path, stats) -> tuple[Dataset, np.ndarray]:
    ds = load_dataset(path)
    x = np.stack([normalize_array(s.inputs, stats).astype(np.float32) for s in ds.samples])
    return ds, x


def cmd_predict(args) -> int:
    model, stats, meta = load_model(args.checkpoint)
    if stats is None:
        raise DataError(f"{args.checkpoint}: checkpoint carries no normalisation statistics")
    if args.chunk is not None and args.chunk != model.cfg.chunk:
        raise ConfigError(f"--chunk {args.chunk} differs from the checkpoint's chunk {model.cfg.chunk}")
    ds, x = _inputs_from(args.input, stats)
    horizon = args.horizon or ds.t_out
    if horizon % model.cfg.chunk:
        raise ConfigError(f"horizon {horizon} not divisible by chunk {model.cfg.chunk}")
    sc = ScoreConfig(kind=args.scorer, dx=ds.dx, dy=ds.dy, boundary=ds.boundary)
    if args.scorer in ("spectrum_match", "composite"):
        ref = meta.get("reference_spectrum")
        if not ref:
            raise ConfigError(f"{args.checkpoint}: no training reference spectrum for scorer {args.scorer!r}")
        sc.reference = SpectrumCurve(np.asarray(ref["k"]), np.asarray(ref["energy"]))
    score_fn = scorer_for(sc, stats)
    out = ensure_dir(args.out, args.force)
    preds, rows = [], []
    model.decode_calls = 0
    with open(out / "trace.jsonl", "w") as trace:
        for i, xi in enumerate(x):
            if model.cfg.quantize:
                res = beam_forecast(xi, model, BeamConfig(width=args.beam, horizon=horizon, chunk=model.cfg.chunk),
                                    score_fn, model.greedy_rollout(xi, horizon)[0] if args.scorer == "neg_mse" else None)
                pred, score = res.forecast, res.best.score
                for rec in res.trace:
                    trace.write(json.dumps({"sample": i, **rec}) + "\n")
            else:
                pred = model.greedy_rollout(xi, horizon)[0]
                score = score_fn(pred)
            preds.append(pred)
            rows.append({"sample": i, "beam_width": args.beam, "score": score})
    phys = denormalize(np.stack(preds), stats).astype(np.float32)
    samples = [SampleWindow(s.inputs, p, Provenance.PSEUDO, s.sample_id) for s, p in zip(ds.samples, phys)]
    save_dataset(out / "forecast.bvqd", Dataset(samples, ds.dx, ds.dy, ds.boundary))
    write_rows(out / "scores.csv", rows)
    expected = len(x) * count_states(horizon, args.beam if model.cfg.quantize else 1, model.cfg.chunk)
    _write_json(out / "manifest.json", {"checkpoint": str(args.checkpoint), "config_hash": meta.get("config_hash", ""),
                                        "beam_width": args.beam, "chunk": model.cfg.chunk, "horizon": horizon,
                                        "decode_calls": model.decode_calls, "expected_states": expected,
                                        "mean_score": float(np.mean([r["score"] for r in rows]))})
    print(f"forecast {len(x)} windows with K={args.beam}; mean score {np.mean([r['score'] for r in rows]):.6g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = load_dataset(args.dataset)
    y = truth.targets()
    meta = {}
    if args.predictions:
        pred_ds = load_dataset(args.predictions)
        if len(pred_ds) != len(truth) or pred_ds.targets().shape != y.shape:
            raise DataError("prediction and truth datasets disagree in size or shape")
        pred = pred_ds.targets()
        if args.checkpoint:
            _, stats, meta = load_model(args.checkpoint)
        else:
            stats = compute_stats(truth)
    elif args.checkpoint:
        model, stats, meta = load_model(args.checkpoint)
        if stats is None:
            raise DataError(f"{args.checkpoint}: checkpoint carries no normalisation statistics")
        _, x = _inputs_from(args.dataset, stats)
        sc = scorer_for(ScoreConfig(kind="neg_divergence", dx=truth.dx, dy=truth.dy, boundary=truth.boundary), stats)
        pred_n, _ = forecast(model, x, truth.t_out, args.beam if model.cfg.quantize else 1, sc)
        pred = denormalize(pred_n, stats)
    else:
        raise ConfigError("eval needs --checkpoint or --predictions")
    pred_n, truth_n = normalize_array(pred, stats), normalize_array(y, stats)
    report = evaluate_forecasts(pred_n, truth_n, stats, truth)
    out = ensure_dir(args.out, args.force)
    report.write_csv(out / "metrics.csv")
    (out / "metrics.json").write_text(report.to_json() + "\n")
    energy_spectrum(FieldTensor(pred.reshape(-1, *pred.shape[2:]), truth.dx, truth.dy, truth.boundary)).to_csv(
        out / "spectrum_pred.csv")
    energy_spectrum(FieldTensor(y.reshape(-1, *y.shape[2:]), truth.dx, truth.dy, truth.boundary)).to_csv(
        out / "spectrum_true.csv")
    curves = leadtime_curves(pred_n, truth_n)
    write_rows(out / "leadtime.csv", [{k: (int(v[i]) if k == "step" else float(v[i])) for k, v in curves.items()}
                                      for i in range(len(curves["step"]))])
    _write_json(out / "manifest.json", {"dataset": _sha256(args.dataset), "config_hash": meta.get("config_hash", "")})
    print(report.to_json())
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    variants = tuple(args.variants.split(",")) if args.variants else tuple(cfg["experiment"]["variants"])
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}; expected some of {sorted(VARIANTS)}")
    rows_variants = ("beamvq",) + tuple(v for v in variants if v != "beamvq")
    out = ensure_dir(args.out, args.force)
    raw = _load_splits(cfg, args.data)
    stats = compute_stats(raw["train"])
    splits = {k: normalize(v, stats) for k, v in raw.items()}
    tc = cfg.train()
    tc.scorer = cfg.scorer()
    rows = []
    for seed in cfg["experiment"]["seeds"]:
        for name in ("base",) + rows_variants:
            vdir = out / f"{name}_seed{seed}"
            variant = resolve_variant(name, cfg["beam"]["width"], cfg["beam"]["scorer"])
            report, model = run_variant(variant, splits, stats, cfg.backbone(), tc, cfg["bank"]["size"], seed, vdir,
                                        eval_max=cfg["experiment"]["eval_max"] or None, verbose=args.verbose)
            report.config_hash = cfg.hash()
            _write_json(vdir / "report.json", report.row())
            save_model(vdir / "model.bvqp", model, stats, _model_meta(cfg, splits["train"], stats, name, seed))
            rows.append(report.row())
            print(f"{name} seed {seed}: mse {report.metrics.mse:.6g} div {report.metrics.mean_abs_divergence:.6g}")
    write_rows(out / "comparison.csv", rows)
    return EXIT_OK


# -- entry point --------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beamvq", description="Physics-scored beam search over a VQ forecaster.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads (also BVQ_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="INI experiment config (defaults when omitted)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--force", action="store_true", help="allow writing into a nonempty output directory")
        sp.add_argument("--verbose", action="store_true")

    g = sub.add_parser("gen-data", help="simulate shallow-water trajectories into BVQD splits")
    common(g)
    g.add_argument("--seed", type=int, default=None, help="offset added to the configured trajectory seeds")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train one model and evaluate it on the test split")
    common(t)
    t.add_argument("--data", help="directory written by gen-data (simulated afresh when omitted)")
    t.add_argument("--variant", choices=sorted(VARIANTS), help="named variant instead of the config's own")
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="beam-search forecasts for every window of a dataset")
    common(pr, config=False)
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--input", required=True, help="BVQD dataset whose inputs are forecast")
    pr.add_argument("--beam", type=int, default=5, help="beam width K")
    pr.add_argument("--chunk", type=int, default=None, help="frames per step; must match the checkpoint")
    pr.add_argument("--horizon", type=int, default=None)
    pr.add_argument("--scorer", default="neg_divergence", choices=["neg_divergence", "spectrum_match", "composite", "neg_mse"])
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="metric report for a checkpoint or a forecast file")
    common(e, config=False)
    e.add_argument("--dataset", required=True)
    e.add_argument("--checkpoint")
    e.add_argument("--predictions", help="BVQD file whose targets are forecasts of --dataset")
    e.add_argument("--beam", type=int, default=1)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("ablate", help="train the baseline, full model and ablation variants")
    common(a)
    a.add_argument("--data")
    a.add_argument("--variants", help=f"comma list (default from config; choices {','.join(ABLATIONS)})")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads or (int(os.environ["BVQ_THREADS"]) if os.environ.get("BVQ_THREADS") else None)
    try:
        with _thread_limit(threads):
            return args.func(args)
    except (ConfigError, FileExistsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
