"""Training epochs, generation passes and the phased self-training driver."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import Adam
from ..beam import BeamConfig, beam_forecast
from ..backbone import Forecaster
from ..data.field import Dataset, FieldTensor, NormStats, SampleWindow
from ..data.windows import denormalize
from ..errors import ConfigError, DataError, NumericError
from ..metrics.physics import energy_spectrum
from ..metrics.score import ScoreConfig, make_scorer
from ..metrics.statistical import mse
from .loss import LossWeights, total_loss
from .pool import GeneratedCandidate, HighQualityPool, filter_candidates
from .schedule import TrainSchedule

LOG_FIELDS = ("epoch", "phase", "train_loss", "val_mse", "pool_size", "generation_ran", "wall_seconds")


@dataclass
class TrainConfig:
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    weights: LossWeights = field(default_factory=LossWeights)
    lr: float = 1e-3
    batch_size: int = 100
    seed: int = 0
    self_training: bool = True
    beam_width: int = 5
    scorer: ScoreConfig = field(default_factory=ScoreConfig)
    filter_rule: str = "quartile"
    threshold: float = 0.0
    gen_max_inputs: int = 16
    val_max: int = 32
    val_every: int = 5
    patience: int = 0  # validations without improvement before stopping; 0 disables
    restore_best: bool = True
    kmeans_init: bool = False

    def validate(self) -> None:
        self.schedule.validate()
        self.weights.validate()
        self.scorer.validate()
        if self.lr < 0 or self.batch_size < 1 or self.beam_width < 1:
            raise ConfigError("lr must be >= 0, batch size and beam width >= 1")
        if self.gen_max_inputs < 1 or self.val_max < 1 or self.val_every < 1 or self.patience < 0:
            raise ConfigError("generation cap, validation cap/frequency must be >= 1 and patience >= 0")


@dataclass
class EpochStats:
    mean_loss: float
    batches: int
    parts: dict[str, float]


@dataclass
class GenerationStats:
    epoch: int
    inputs: int
    candidates: int
    admitted: int
    threshold: float
    scores: list[float]


@dataclass
class TrainResult:
    model: Forecaster
    log: list[dict]
    pool: HighQualityPool
    generations: list[GenerationStats]
    best_epoch: int
    best_val: float


def chunk_pairs(samples: list[SampleWindow], chunk: int, t_in: int,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Teacher-forced (input, next chunk) pairs, one random offset per window."""
    xs, ys = [], []
    for s in samples:
        seq = np.concatenate([s.inputs, s.target])
        j = int(rng.integers(0, s.target.shape[0] - chunk + 1))
        xs.append(seq[j : j + t_in])
        ys.append(seq[j + t_in : j + t_in + chunk])
    return np.stack(xs).astype(np.float32), np.stack(ys).astype(np.float32)


def train_step(model: Forecaster, x: np.ndarray, y: np.ndarray, opt: Adam,
               weights: LossWeights) -> tuple[float, dict[str, float]]:
    z = model.encode(x)
    q, e, _ = model.quantize(z)
    pred = model.decode(q, x[:, -1])
    loss, parts = total_loss(pred, y, z, e, weights)
    opt.zero_grad()
    loss.backward()
    opt.step()
    return loss.item(), parts


def train_epoch(model: Forecaster, samples: list[SampleWindow], opt: Adam, weights: LossWeights,
                rng: np.random.Generator, batch_size: int = 100) -> EpochStats:
    """One shuffled pass of mini-batches; aborts with a diagnostic on non-finite values."""
    if not samples:
        raise DataError("train_epoch needs a nonempty dataset")
    cfg = model.cfg
    bs = min(batch_size, len(samples))
    order = rng.permutation(len(samples))
    x_all, y_all = chunk_pairs([samples[i] for i in order], cfg.chunk, cfg.t_in, rng)
    losses, sizes = [], []
    totals = {"mse": 0.0, "commitment": 0.0, "codebook": 0.0}
    for b, start in enumerate(range(0, len(samples), bs)):
        x, y = x_all[start : start + bs], y_all[start : start + bs]
        try:
            loss, parts = train_step(model, x, y, opt, weights)
        except NumericError as exc:
            raise NumericError(f"epoch {model.epoch}, batch {b}: {exc}") from exc
        if not np.isfinite(loss):
            raise NumericError(f"epoch {model.epoch}, batch {b}: non-finite loss {loss}")
        losses.append(loss)
        sizes.append(len(x))
        for k in totals:
            totals[k] += parts[k] * len(x)
    n = float(sum(sizes))
    return EpochStats(float(np.dot(losses, sizes) / n), len(losses), {k: v / n for k, v in totals.items()})


def validation_mse(model: Forecaster, dataset: Dataset, max_samples: int = 32) -> float:
    """Greedy-rollout MSE over an evenly spaced subset of original windows."""
    orig = dataset.originals()
    if not orig:
        raise DataError("validation needs original samples")
    pick = np.unique(np.linspace(0, len(orig) - 1, min(max_samples, len(orig))).round().astype(int))
    x = np.stack([orig[i].inputs for i in pick])
    y = np.stack([orig[i].target for i in pick])
    return mse(model.greedy_rollout(x, y.shape[1]), y)


def scorer_for(config: ScoreConfig, stats: NormStats | None):
    transform = (lambda a: denormalize(a, stats)) if stats is not None else None
    return make_scorer(config, transform)


def reference_spectrum(dataset: Dataset, stats: NormStats | None, max_samples: int = 64):
    """Climatological spectrum of training targets in physical units."""
    orig = dataset.originals()[:max_samples]
    frames = np.concatenate([s.target for s in orig])
    if stats is not None:
        frames = denormalize(frames, stats)
    return energy_spectrum(FieldTensor(frames, dataset.dx, dataset.dy, dataset.boundary))


def generate_candidates(model: Forecaster, samples: list[SampleWindow], width: int, horizon: int,
                        score_fn, use_greedy_reference: bool = False) -> list[GeneratedCandidate]:
    """Beam-search every input and return all final candidates with scores."""
    out = []
    bc = BeamConfig(width=width, horizon=horizon, chunk=model.cfg.chunk)
    for s in samples:
        ref = model.greedy_rollout(s.inputs, horizon)[0] if use_greedy_reference else None
        res = beam_forecast(s.inputs, model, bc, score_fn, ref)
        for i, c in enumerate(res.finals):
            out.append(GeneratedCandidate(s.sample_id, i, c.score, s.inputs, c.frames))
    return out


def generation_pass(model: Forecaster, train: Dataset, cfg: TrainConfig, epoch: int, score_fn,
                    pool: HighQualityPool) -> GenerationStats:
    orig = train.originals()
    rng = np.random.default_rng([cfg.seed, epoch])
    n = min(cfg.gen_max_inputs, len(orig))
    pick = np.sort(rng.choice(len(orig), size=n, replace=False))
    cands = generate_candidates(model, [orig[i] for i in pick], cfg.beam_width, train.t_out, score_fn,
                                use_greedy_reference=cfg.scorer.kind == "neg_mse")
    admitted, thr = filter_candidates(cands, cfg.filter_rule, cfg.threshold)
    added = pool.admit(admitted, epoch)
    return GenerationStats(epoch, n, len(cands), added, thr, [c.score for c in cands])


def write_log(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=LOG_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in LOG_FIELDS})


def run_training(model: Forecaster, train: Dataset, val: Dataset, cfg: TrainConfig,
                 stats: NormStats | None = None, out_dir=None, verbose: bool = False) -> TrainResult:
    """Phased training: original data only before ``e1``, then scheduled
    generate-and-filter passes that grow the pseudo-label pool.

    Generation at a scheduled epoch uses the parameters from before that
    epoch's updates.  On a numeric abort a checkpoint and the partial log
    are written to ``out_dir`` before the error propagates.
    """
    from ..model_io import save_model

    cfg.validate()
    out = Path(out_dir) if out_dir is not None else None
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.trainable(), lr=cfg.lr)
    if cfg.kmeans_init and model.cfg.quantize:
        x0 = train.inputs()[: cfg.batch_size]
        model.bank.kmeans_init(model.encode(x0).data, seed=cfg.seed)
    score_cfg = cfg.scorer
    if score_cfg.kind in ("spectrum_match", "composite") and score_cfg.reference is None:
        raise ConfigError("spectrum scorers need a reference; build it with reference_spectrum()")
    score_fn = scorer_for(score_cfg, stats)

    pool = HighQualityPool()
    gens: list[GenerationStats] = []
    rows: list[dict] = []
    originals = train.originals()
    best_val, best_epoch, best_arrays, since_best = np.inf, -1, None, 0
    sched = cfg.schedule
    try:
        for t in range(sched.total):
            model.epoch = t
            t0 = time.perf_counter()
            ran = bool(cfg.self_training and model.cfg.quantize and sched.generates(t))
            if ran:
                gens.append(generation_pass(model, train, cfg, t, score_fn, pool))
            samples = originals + pool.samples() if len(pool) else originals
            stats_t = train_epoch(model, samples, opt, cfg.weights, rng, cfg.batch_size)
            val_mse = float("nan")
            if (t + 1) % cfg.val_every == 0 or t == sched.total - 1:
                val_mse = validation_mse(model, val, cfg.val_max)
                if val_mse < best_val:
                    best_val, best_epoch, since_best = val_mse, t, 0
                    best_arrays = {k: v.copy() for k, v in model.state_arrays().items()}
                else:
                    since_best += 1
            rows.append({"epoch": t, "phase": sched.phase(t), "train_loss": stats_t.mean_loss,
                         "val_mse": val_mse, "pool_size": len(pool), "generation_ran": int(ran),
                         "wall_seconds": time.perf_counter() - t0})
            if verbose:
                r = rows[-1]
                pt = stats_t.parts
                print(f"epoch {t:4d} {r['phase']:7s} loss {r['train_loss']:.5f} (mse {pt['mse']:.5f} "
                      f"commit {pt['commitment']:.5f} code {pt['codebook']:.5f}) val {val_mse:.5f} pool {len(pool)}")
            if cfg.patience and since_best >= cfg.patience:
                break
    except NumericError:
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            save_model(out / "abort.bvqp", model, stats, {"aborted_epoch": model.epoch})
            write_log(out / "epochs.csv", rows)
        raise
    if cfg.restore_best and best_arrays is not None:
        model.load_arrays(best_arrays)
        model.epoch = best_epoch
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_log(out / "epochs.csv", rows)
        if len(pool):
            pool.save(out / "pool.bvqd", train.dx, train.dy, train.boundary)
    return TrainResult(model, rows, pool, gens, best_epoch, float(best_val))
