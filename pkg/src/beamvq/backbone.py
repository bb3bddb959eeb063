"""Convolutional encoder, token projection and upsampling decoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import Tensor, add_const, conv2d, linear, no_grad, relu, reshape, sigmoid, transpose, upconv2d
from .codebank import CodeBank, straight_through
from .errors import ConfigError, ShapeError


@dataclass
class BackboneConfig:
    t_in: int = 5
    channels: int = 3
    height: int = 64
    width: int = 64
    widths: tuple[int, ...] = (32, 64, 64)
    code_dim: int = 64
    chunk: int = 1
    kernel: int = 3
    activation: str = "sigmoid"
    residual: bool = True
    quantize: bool = True

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        self.validate()

    @property
    def downsample(self) -> int:
        return 2 ** len(self.widths)

    @property
    def latent_hw(self) -> tuple[int, int]:
        f = self.downsample
        return self.height // f, self.width // f

    @property
    def tokens(self) -> int:
        h, w = self.latent_hw
        return h * w

    def validate(self) -> None:
        if min(self.t_in, self.channels, self.height, self.width, self.chunk, self.code_dim) < 1:
            raise ConfigError("backbone dims must be positive")
        if not self.widths:
            raise ConfigError("backbone needs at least one encoder block")
        f = self.downsample
        if self.height % f or self.width % f:
            raise ConfigError(f"grid {self.height}x{self.width} not divisible by downsample factor {f}")
        if self.activation not in ("sigmoid", "identity"):
            raise ConfigError(f"unknown projection activation {self.activation!r}")
        if self.kernel % 2 != 1:
            raise ConfigError("kernel size must be odd")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["widths"] = list(self.widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BackboneConfig":
        return cls(**d)


def param_shapes(cfg: BackboneConfig) -> dict[str, tuple[int, ...]]:
    k = cfg.kernel
    shapes: dict[str, tuple[int, ...]] = {}
    cin = cfg.t_in * cfg.channels
    for i, w in enumerate(cfg.widths):
        shapes[f"enc{i}.w"] = (k, k, cin, w)
        shapes[f"enc{i}.b"] = (w,)
        cin = w
    shapes["proj.w"] = (cin, cfg.code_dim)
    shapes["proj.b"] = (cfg.code_dim,)
    dec_widths = list(reversed(cfg.widths[:-1])) + [cfg.chunk * cfg.channels]
    cin = cfg.code_dim
    for i, w in enumerate(dec_widths):
        shapes[f"dec{i}.w"] = (k, k, cin, w)
        shapes[f"dec{i}.b"] = (w,)
        cin = w
    return shapes


def param_count(cfg: BackboneConfig) -> int:
    return int(sum(np.prod(s) for s in param_shapes(cfg).values()))


@dataclass
class Forecaster:
    """Encoder E, projection (W, b, sigma), code bank and decoder D.

    ``decode_calls`` counts decoded states (one per batch row) and is the
    instrumented counter behind the beam-search cost model.
    """

    cfg: BackboneConfig
    bank: CodeBank
    params: dict[str, Tensor]
    epoch: int = 0
    decode_calls: int = field(default=0, compare=False)

    @classmethod
    def create(cls, cfg: BackboneConfig, bank_size: int = 1024, seed: int = 0) -> "Forecaster":
        rng = np.random.default_rng(seed)
        params: dict[str, Tensor] = {}
        shapes = param_shapes(cfg)
        for name, shape in shapes.items():
            if name.endswith(".b"):
                arr = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[:-1]))
                bound = np.sqrt(6.0 / fan_in)
                arr = rng.uniform(-bound, bound, size=shape)
            params[name] = Tensor(arr.astype(np.float32), requires_grad=True, name=name)
        # the last decoder layer starts small so the residual path dominates early
        last = f"dec{len(cfg.widths) - 1}.w"
        params[last].data *= np.float32(0.1)
        bank = CodeBank(bank_size, cfg.code_dim, seed=rng)
        return cls(cfg=cfg, bank=bank, params=params)

    # -- parameter plumbing -----------------------------------------------------
    def trainable(self) -> dict[str, Tensor]:
        out = dict(self.params)
        if self.cfg.quantize:
            out["codebank"] = self.bank.codes
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {n: p.data for n, p in self.params.items()}
        out["codebank"] = self.bank.codes.data
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            if name not in arrays:
                raise ShapeError(f"checkpoint missing {name}", p.shape, ())
            if arrays[name].shape != p.shape:
                raise ShapeError(f"checkpoint {name}", arrays[name].shape, p.shape)
            p.data = np.array(arrays[name], dtype=np.float32)
        self.bank.codes.data = np.array(arrays["codebank"], dtype=np.float32)

    def copy(self) -> "Forecaster":
        other = Forecaster.create(self.cfg, bank_size=self.bank.size)
        other.load_arrays({k: v.copy() for k, v in self.state_arrays().items()})
        other.epoch = self.epoch
        return other

    # -- forward pieces ----------------------------------------------------------
    def _check_input(self, x: np.ndarray) -> np.ndarray:
        c = self.cfg
        want = (c.t_in, c.channels, c.height, c.width)
        if x.ndim == 4:
            x = x[None]
        if x.ndim != 5 or x.shape[1:] != want:
            raise ShapeError("encode", x.shape, ("N",) + want)
        return x

    def encode(self, x: np.ndarray) -> Tensor:
        """Input windows (N, T_in, C, H, W) -> projected tokens z' of shape (N*l, D)."""
        x = self._check_input(x)
        n = x.shape[0]
        c = self.cfg
        h = Tensor(np.ascontiguousarray(x.transpose(0, 3, 4, 1, 2), dtype=np.float32).reshape(
            n, c.height, c.width, c.t_in * c.channels))
        p = self.params
        pad = c.kernel // 2
        for i in range(len(c.widths)):
            h = conv2d(h, p[f"enc{i}.w"], p[f"enc{i}.b"], stride=2, pad=pad)
            if i < len(c.widths) - 1:
                h = relu(h)
        tokens = reshape(h, (n * c.tokens, c.widths[-1]))
        z = linear(tokens, p["proj.w"], p["proj.b"])
        return sigmoid(z) if c.activation == "sigmoid" else z

    def decode(self, states: Tensor, last_frame: np.ndarray) -> Tensor:
        """Tokens (N*l, D) -> c frames (N, c, C, H, W).

        With ``residual`` the last input frame (N, C, H, W) is added to
        every decoded frame.
        """
        c = self.cfg
        if states.data.ndim != 2 or states.shape[1] != c.code_dim or states.shape[0] % c.tokens:
            raise ShapeError("decode", states.shape, ("N*l", c.code_dim))
        n = states.shape[0] // c.tokens
        lh, lw = c.latent_hw
        h = reshape(states, (n, lh, lw, c.code_dim))
        p = self.params
        nblocks = len(c.widths)
        for i in range(nblocks):
            h = upconv2d(h, p[f"dec{i}.w"], p[f"dec{i}.b"])
            if i < nblocks - 1:
                h = relu(h)
        out = transpose(reshape(h, (n, c.height, c.width, c.chunk, c.channels)), (0, 3, 4, 1, 2))
        self.decode_calls += n
        if c.residual:
            last = np.asarray(last_frame, dtype=np.float32).reshape(n, 1, c.channels, c.height, c.width)
            out = add_const(out, np.broadcast_to(last, out.shape))
        return out

    def quantize(self, z_prime: Tensor) -> tuple[Tensor, Tensor | None, np.ndarray | None]:
        """Nearest-code quantisation with straight-through gradients.

        Returns (decoder input, selected codes e, indices).  With
        quantisation disabled the projection feeds the decoder directly.
        """
        if not self.cfg.quantize:
            return z_prime, None, None
        idx, _ = self.bank.quantize_nearest(z_prime.data)
        e = self.bank.lookup(idx)
        return straight_through(z_prime, e), e, idx

    # -- inference ---------------------------------------------------------------
    def predict_chunk(self, window: np.ndarray) -> np.ndarray:
        """Deterministic nearest-code forecast of the next c frames."""
        with no_grad():
            z = self.encode(window)
            if self.cfg.quantize:
                _, states = self.bank.quantize_nearest(z.data)
                states = Tensor(states)
            else:
                states = z
            return self.decode(states, window[:, -1] if window.ndim == 5 else window[None, -1]).data

    def greedy_rollout(self, x: np.ndarray, horizon: int) -> np.ndarray:
        """Autoregressive forecast (N, horizon, C, H, W) sliding the window by c frames."""
        x = self._check_input(np.asarray(x, dtype=np.float32))
        c = self.cfg.chunk
        if horizon % c:
            raise ValueError(f"horizon {horizon} not divisible by chunk {c}")
        window = x
        frames = []
        for _ in range(horizon // c):
            out = self.predict_chunk(window)
            frames.append(out)
            window = np.concatenate([window, out], axis=1)[:, -self.cfg.t_in :]
        return np.concatenate(frames, axis=1)
