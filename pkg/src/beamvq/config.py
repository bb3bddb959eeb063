"""Typed INI experiment configuration.

Every section and key is declared in ``SCHEMA``; unknown sections or keys
and unparsable values raise ConfigError before any work starts.  The
config hash is the SHA-256 of the canonical JSON of the resolved values.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .backbone import BackboneConfig
from .errors import ConfigError
from .experiment import VARIANTS, DataConfig
from .metrics.score import SCORERS, ScoreConfig
from .training import LossWeights, TrainConfig, TrainSchedule


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.replace(" ", "").split(",") if p)


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(p) for p in s.replace(" ", "").split(",") if p)


def _names(s: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in s.split(",") if p.strip())


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "data": {
        "height": (int, 64), "width": (int, 64), "steps": (int, 235), "frame_every": (int, 1),
        "seeds": (_ints, (0, 1)), "t_in": (int, 5), "t_out": (int, 10), "stride": (int, 1),
        "split": (_floats, (0.7, 0.15, 0.15)),
    },
    "model": {
        "widths": (_ints, (32, 64, 64)), "kernel": (int, 3), "activation": (str, "sigmoid"),
        "residual": (_bool, True), "quantize": (_bool, True),
    },
    "bank": {"size": (int, 1024), "dim": (int, 64)},
    "beam": {
        "width": (int, 5), "chunk": (int, 1), "scorer": (str, "neg_divergence"),
        "w_divergence": (float, 1.0), "w_spectrum": (float, 1.0),
    },
    "train": {
        "epochs": (int, 500), "e1": (int, 100), "e2": (int, 200), "mid_every": (int, 50),
        "late_every": (int, 10), "lr": (float, 1e-3), "batch_size": (int, 100), "lam": (float, 1.0),
        "beta": (float, 0.25), "gamma": (float, 1.0), "vq_reduction": (str, "mean"),
        "self_training": (_bool, True), "filter_rule": (str, "quartile"), "threshold": (float, 0.0),
        "gen_max_inputs": (int, 16), "val_max": (int, 32), "val_every": (int, 5), "patience": (int, 0),
        "kmeans_init": (_bool, False), "seed": (int, 0),
    },
    "experiment": {
        "seeds": (_ints, (0,)), "variants": (_names, ("wo_beams", "wo_selft", "w_mse")),
        "eval_max": (int, 0),
    },
    "output": {"dir": (str, "runs")},
}


@dataclass
class ExperimentConfig:
    values: dict[str, dict] = field(default_factory=dict)

    # -- construction ------------------------------------------------------------
    @classmethod
    def defaults(cls) -> "ExperimentConfig":
        vals = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
        cfg = cls(vals)
        cfg.validate()
        return cfg

    @classmethod
    def from_string(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config syntax error: {exc}") from None
        cfg = cls.defaults()
        for sec in parser.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown config section [{sec}]")
            for key, raw in parser.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in section [{sec}]")
                conv = SCHEMA[sec][key][0]
                try:
                    cfg.values[sec][key] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{sec}] {key} = {raw!r}: {exc}") from None
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        return cls.from_string(p.read_text())

    def override(self, section: str, key: str, value) -> "ExperimentConfig":
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key [{section}] {key}")
        vals = json.loads(json.dumps(self.values))
        vals[section][key] = value
        out = ExperimentConfig({s: {k: _restore(SCHEMA[s][k][1], v) for k, v in d.items()} for s, d in vals.items()})
        out.validate()
        return out

    # -- views ---------------------------------------------------------------------
    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def data(self) -> DataConfig:
        d = self["data"]
        return DataConfig(d["height"], d["width"], d["steps"], d["frame_every"], tuple(d["seeds"]), d["t_in"],
                          d["t_out"], d["stride"], tuple(d["split"]))

    def backbone(self) -> BackboneConfig:
        d, m = self["data"], self["model"]
        return BackboneConfig(t_in=d["t_in"], channels=3, height=d["height"], width=d["width"],
                              widths=tuple(m["widths"]), code_dim=self["bank"]["dim"], chunk=self["beam"]["chunk"],
                              kernel=m["kernel"], activation=m["activation"], residual=m["residual"],
                              quantize=m["quantize"])

    def scorer(self) -> ScoreConfig:
        b = self["beam"]
        return ScoreConfig(kind=b["scorer"], weights={"divergence": b["w_divergence"], "spectrum": b["w_spectrum"]})

    def train(self) -> TrainConfig:
        t = self["train"]
        return TrainConfig(
            schedule=TrainSchedule(t["e1"], t["e2"], t["epochs"], t["mid_every"], t["late_every"]),
            weights=LossWeights(t["lam"], t["beta"], t["gamma"], t["vq_reduction"]),
            lr=t["lr"], batch_size=t["batch_size"], seed=t["seed"], self_training=t["self_training"],
            beam_width=self["beam"]["width"], scorer=ScoreConfig(kind="neg_divergence"),
            filter_rule=t["filter_rule"], threshold=t["threshold"], gen_max_inputs=t["gen_max_inputs"],
            val_max=t["val_max"], val_every=t["val_every"], patience=t["patience"], kmeans_init=t["kmeans_init"],
        )

    # -- validation and identity -------------------------------------------------------
    def validate(self) -> None:
        self.data().validate()
        bb = self.backbone()  # raises on a grid the encoder cannot downsample
        b = self["beam"]
        if b["width"] < 1 or b["chunk"] < 1:
            raise ConfigError("beam width and chunk must be >= 1")
        if self["data"]["t_out"] % b["chunk"]:
            raise ConfigError(f"beam chunk {b['chunk']} must divide t_out {self['data']['t_out']}")
        if b["scorer"] not in SCORERS:
            raise ConfigError(f"unknown scorer {b['scorer']!r}; expected one of {SCORERS}")
        if self["bank"]["size"] < max(1, b["width"]):
            raise ConfigError("bank size must be >= beam width")
        if self["train"]["filter_rule"] not in ("quartile", "constant", "best"):
            raise ConfigError(f"unknown filter rule {self['train']['filter_rule']!r}")
        tc = self.train()
        tc.schedule.validate()
        tc.weights.validate()
        if tc.lr < 0 or tc.batch_size < 1 or tc.gen_max_inputs < 1 or tc.val_every < 1 or tc.val_max < 1:
            raise ConfigError("invalid [train] numeric setting")
        for v in self["experiment"]["variants"]:
            if v not in VARIANTS:
                raise ConfigError(f"unknown variant {v!r}; expected some of {sorted(VARIANTS)}")
        if bb.chunk > self["data"]["t_out"]:
            raise ConfigError("chunk exceeds forecast horizon")

    def to_dict(self) -> dict:
        return json.loads(json.dumps({s: {k: _plain(v) for k, v in sorted(d.items())}
                                      for s, d in sorted(self.values.items())}))

    def canonical(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_ini(self) -> str:
        lines = []
        for sec, d in self.to_dict().items():
            lines.append(f"[{sec}]")
            for k, v in d.items():
                if isinstance(v, list):
                    v = ", ".join(str(a) for a in v)
                elif isinstance(v, bool):
                    v = "true" if v else "false"
                lines.append(f"{k} = {v}")
            lines.append("")
        return "\n".join(lines)


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def _restore(default, v):
    return tuple(v) if isinstance(default, tuple) else v
