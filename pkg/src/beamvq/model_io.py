"""Model checkpoints: BVQP parameter file plus a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

from .autodiff import load_params, save_params
from .backbone import BackboneConfig, Forecaster
from .codebank import CodeBank
from .data.field import NormStats
from .errors import FormatError


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_model(path, model: Forecaster, stats: NormStats | None = None, meta: dict | None = None) -> None:
    save_params(path, model.state_arrays())
    side = {
        "backbone": model.cfg.to_dict(),
        "bank_size": model.bank.size,
        "epoch": model.epoch,
        "stats": stats.to_dict() if stats is not None else None,
        "meta": meta or {},
    }
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True))


def load_model(path) -> tuple[Forecaster, NormStats | None, dict]:
    side_file = sidecar_path(path)
    if not side_file.exists():
        raise FormatError(f"{path}: missing checkpoint sidecar {side_file.name}")
    try:
        side = json.loads(side_file.read_text())
        cfg = BackboneConfig.from_dict(side["backbone"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{side_file}: unreadable sidecar ({exc})") from None
    arrays = load_params(path)
    if "codebank" not in arrays:
        raise FormatError(f"{path}: checkpoint has no codebank tensor")
    model = Forecaster(cfg, CodeBank(codes=arrays["codebank"]), {})
    fresh = Forecaster.create(cfg, bank_size=arrays["codebank"].shape[0])
    model.params = fresh.params
    model.load_arrays(arrays)
    model.epoch = int(side.get("epoch", 0))
    stats = NormStats.from_dict(side["stats"]) if side.get("stats") else None
    return model, stats, side.get("meta", {})
