"""Desk-scale experiment plumbing: data preparation, variant runs and reports."""

from __future__ import annotations

import copy
import csv
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .backbone import BackboneConfig, Forecaster
from .beam import BeamConfig, beam_forecast, count_states
from .data.field import Dataset, NormStats
from .data.swe import SWEConfig, generate_swe, total_volume
from .data.windows import compute_stats, denormalize, merge, normalize, split_by_time, window_dataset
from .errors import ConfigError
from .metrics.report import MetricReport, evaluate
from .metrics.score import ScoreConfig
from .training import TrainConfig, TrainSchedule, reference_spectrum, run_training, scorer_for

SPLITS = ("train", "val", "test")


@dataclass
class DataConfig:
    height: int = 64
    width: int = 64
    steps: int = 235
    frame_every: int = 1
    seeds: tuple[int, ...] = (0, 1)
    t_in: int = 5
    t_out: int = 10
    stride: int = 1
    split: tuple[float, float, float] = (0.7, 0.15, 0.15)

    def validate(self) -> None:
        if not self.seeds:
            raise ConfigError("data needs at least one trajectory seed")
        if min(self.height, self.width, self.steps, self.t_in, self.t_out, self.stride, self.frame_every) < 1:
            raise ConfigError("data dimensions must be positive")
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) <= 0:
            raise ConfigError(f"split must be three positive fractions summing to 1, got {self.split}")


def generate_splits(dc: DataConfig, seed_offset: int = 0) -> tuple[dict[str, Dataset], list[float]]:
    """Simulate trajectories, split each by time and window every block.

    Returns physical-unit datasets and the worst relative volume drift.
    """
    dc.validate()
    parts = {k: [] for k in SPLITS}
    drift = []
    swe = SWEConfig(height=dc.height, width=dc.width, steps=dc.steps, frame_every=dc.frame_every)
    for n, s in enumerate(dc.seeds):
        traj = generate_swe(swe, seed=s + seed_offset)
        vol = total_volume(traj.values)
        drift.append(float(np.abs(vol - vol[0]).max() / vol[0]))
        for k, block in zip(SPLITS, split_by_time(traj, dc.split)):
            parts[k].append(window_dataset(block, dc.t_in, dc.t_out, dc.stride, id_offset=n * 100000,
                                           source={"seed": s + seed_offset, "split": k}))
    return {k: merge(v) for k, v in parts.items()}, drift


def normalise_splits(raw: dict[str, Dataset]) -> tuple[dict[str, Dataset], NormStats]:
    stats = compute_stats(raw["train"])
    return {k: normalize(v, stats) for k, v in raw.items()}, stats


@dataclass
class Variant:
    """One row of the experiment matrix, reachable purely from configuration."""

    name: str
    quantize: bool = True
    self_training: bool = True
    gen_width: int = 5
    infer_width: int = 5
    gen_scorer: str = "neg_divergence"
    infer_scorer: str = "neg_divergence"


VARIANTS = {
    "base": Variant("base", quantize=False, self_training=False, gen_width=1, infer_width=1),
    "vqvae": Variant("vqvae", self_training=False, gen_width=1, infer_width=1),
    "beamvq": Variant("beamvq"),
    "wo_beams": Variant("wo_beams", gen_width=1, infer_width=1),
    "wo_selft": Variant("wo_selft", self_training=False),
    "w_mse": Variant("w_mse", gen_scorer="neg_mse"),
}
ABLATIONS = ("wo_beams", "wo_selft", "w_mse")


def resolve_variant(name: str, width: int, scorer: str) -> Variant:
    """Bind a named variant to the configured beam width and physics scorer."""
    if name not in VARIANTS:
        raise ConfigError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}")
    v = VARIANTS[name]
    return replace(v, gen_width=width if v.gen_width > 1 else 1, infer_width=width if v.infer_width > 1 else 1,
                   gen_scorer=scorer if v.gen_scorer != "neg_mse" else "neg_mse", infer_scorer=scorer)


@dataclass
class RunReport:
    variant: str
    seed: int
    metrics: MetricReport
    decode_calls: int
    expected_states: int
    best_epoch: int
    pool_size: int
    train_seconds: float
    eval_seconds: float
    config_hash: str = ""

    def row(self) -> dict:
        out = {"variant": self.variant, "seed": self.seed}
        out.update({k: float(v) for k, v in zip(MetricReport.header(), self.metrics.row())})
        out.update({"decode_calls": self.decode_calls, "expected_states": self.expected_states,
                    "best_epoch": self.best_epoch, "pool_size": self.pool_size,
                    "train_seconds": round(self.train_seconds, 3), "eval_seconds": round(self.eval_seconds, 3),
                    "config_hash": self.config_hash})
        return out


def score_config(kind: str, base: ScoreConfig, reference=None) -> ScoreConfig:
    return replace(base, kind=kind, reference=reference if reference is not None else base.reference)


def forecast(model: Forecaster, inputs: np.ndarray, horizon: int, width: int, score_fn) -> tuple[np.ndarray, list]:
    """Greedy rollout for width 1 or non-quantising models, beam search otherwise."""
    if width == 1 or not model.cfg.quantize:
        return model.greedy_rollout(inputs, horizon), []
    bc = BeamConfig(width=width, horizon=horizon, chunk=model.cfg.chunk)
    preds, traces = [], []
    for x in inputs:
        ref = model.greedy_rollout(x, horizon)[0] if score_fn.kind == "neg_mse" else None
        res = beam_forecast(x, model, bc, score_fn, ref)
        preds.append(res.forecast)
        traces.append(res.trace)
    return np.stack(preds), traces


def evaluate_forecasts(pred_n: np.ndarray, truth_n: np.ndarray, stats: NormStats, ds: Dataset) -> MetricReport:
    """Statistical metrics in normalised units, physics diagnostics in physical units."""
    return evaluate(denormalize(pred_n, stats), denormalize(truth_n, stats), ds.dx, ds.dy, ds.boundary,
                    stat_pred=pred_n, stat_truth=truth_n)


def run_variant(variant: Variant, splits: dict[str, Dataset], stats: NormStats, backbone: BackboneConfig,
                train_cfg: TrainConfig, bank_size: int = 1024, seed: int = 0, out_dir=None,
                eval_max: int | None = None, verbose: bool = False) -> tuple[RunReport, Forecaster]:
    train, val, test = splits["train"], splits["val"], splits["test"]
    bcfg = replace(backbone, quantize=variant.quantize)
    model = Forecaster.create(bcfg, bank_size=bank_size, seed=seed)
    needs_ref = "spectrum" in (variant.gen_scorer + variant.infer_scorer) or "composite" in (
        variant.gen_scorer + variant.infer_scorer)
    ref = reference_spectrum(train, stats) if needs_ref else None
    tc = copy.deepcopy(train_cfg)
    tc.seed = seed
    tc.self_training = variant.self_training and variant.quantize
    tc.beam_width = variant.gen_width
    tc.scorer = score_config(variant.gen_scorer, train_cfg.scorer, ref)
    t0 = time.perf_counter()
    result = run_training(model, train, val, tc, stats, out_dir=out_dir, verbose=verbose)
    t1 = time.perf_counter()

    orig = test.originals()
    if eval_max is not None:
        orig = orig[:eval_max]
    x = np.stack([s.inputs for s in orig])
    y = np.stack([s.target for s in orig])
    infer_cfg = score_config(variant.infer_scorer, train_cfg.scorer, ref)
    score_fn = scorer_for(infer_cfg, stats)
    model.decode_calls = 0
    pred, _ = forecast(model, x, test.t_out, variant.infer_width, score_fn)
    calls = model.decode_calls
    width = variant.infer_width if model.cfg.quantize else 1
    expected = len(x) * count_states(test.t_out, width, model.cfg.chunk)
    report = evaluate_forecasts(pred, y, stats, test)
    t2 = time.perf_counter()
    return RunReport(variant.name, seed, report, calls, expected, result.best_epoch, len(result.pool),
                     t1 - t0, t2 - t1), model


def write_rows(path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def desk_train_config(epochs: int = 100, e1: int = 20, e2: int = 40, **kw) -> TrainConfig:
    """The compressed schedule used by the desk experiments."""
    return TrainConfig(schedule=TrainSchedule(e1=e1, e2=e2, total=epochs), **kw)


def default_backbone(dc: DataConfig, **kw) -> BackboneConfig:
    return BackboneConfig(t_in=dc.t_in, height=dc.height, width=dc.width, **kw)


def ensure_dir(path, force: bool = False) -> Path:
    """Create an output directory, refusing to reuse a nonempty one unless forced."""
    p = Path(path)
    if p.exists() and any(p.iterdir()) and not force:
        raise FileExistsError(f"{p} exists and is not empty; pass --force to overwrite")
    p.mkdir(parents=True, exist_ok=True)
    return p
