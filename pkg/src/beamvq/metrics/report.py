"""MetricReport bundles statistical and physics diagnostics for one forecast set."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..data.field import Boundary, FieldTensor
from .physics import energy_spectrum, mean_abs_divergence, spectrum_distance, tke
from .statistical import mse, rel_l2, ssim


@dataclass
class MetricReport:
    mse: float
    rmse: float
    rel_l2: float
    ssim: float
    mean_abs_divergence: float
    tke_pred: float
    tke_true: float
    tke_rel_error: float
    spectrum_distance: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[float]:
        return [getattr(self, n) for n in self.header()]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=False)

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([repr(float(v)) for v in self.row()])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(self.header())
            w.writerow([repr(float(v)) for v in self.row()])


def evaluate(pred: np.ndarray, truth: np.ndarray, dx: float = 1.0, dy: float = 1.0,
             boundary: Boundary = Boundary.PERIODIC, stat_pred: np.ndarray | None = None,
             stat_truth: np.ndarray | None = None) -> MetricReport:
    """Metrics for forecasts shaped (N, T, C, H, W) or (T, C, H, W).

    ``stat_pred``/``stat_truth`` optionally supply the arrays used for the
    statistical metrics (e.g. normalised fields) while physics diagnostics
    use ``pred``/``truth`` in physical units.  Physics metrics are averaged
    over samples.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.ndim == 4:
        pred, truth = pred[None], truth[None]
    sp = pred if stat_pred is None else np.asarray(stat_pred)
    st = truth if stat_truth is None else np.asarray(stat_truth)
    if sp.ndim == 4:
        sp, st = sp[None], st[None]
    m = mse(sp, st)
    divs, tp, tt, sd = [], [], [], []
    for p, t in zip(pred, truth):
        fp = FieldTensor(p, dx, dy, boundary)
        ft = FieldTensor(t, dx, dy, boundary)
        divs.append(mean_abs_divergence(fp))
        tp.append(tke(fp)[1])
        tt.append(tke(ft)[1])
        sd.append(spectrum_distance(energy_spectrum(fp), energy_spectrum(ft)))
    tke_pred = float(np.mean(tp))
    tke_true = float(np.mean(tt))
    return MetricReport(
        mse=m,
        rmse=float(np.sqrt(m)),
        rel_l2=rel_l2(sp, st),
        ssim=ssim(sp, st),
        mean_abs_divergence=float(np.mean(divs)),
        tke_pred=tke_pred,
        tke_true=tke_true,
        tke_rel_error=abs(tke_pred - tke_true) / tke_true if tke_true > 0 else float("inf"),
        spectrum_distance=float(np.mean(sd)),
    )


def leadtime_curves(pred: np.ndarray, truth: np.ndarray) -> dict[str, np.ndarray]:
    """SSIM, RMSE and relative L2 per forecast step for (N, T, C, H, W) arrays."""
    steps = pred.shape[1]
    out = {"step": np.arange(1, steps + 1), "ssim": np.zeros(steps), "rmse": np.zeros(steps), "rel_l2": np.zeros(steps)}
    for k in range(steps):
        out["ssim"][k] = ssim(pred[:, k], truth[:, k])
        out["rmse"][k] = np.sqrt(mse(pred[:, k], truth[:, k]))
        out["rel_l2"][k] = rel_l2(pred[:, k], truth[:, k])
    return out
