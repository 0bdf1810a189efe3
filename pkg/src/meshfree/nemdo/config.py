from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

from ..errors import InvalidArgument
from ..taylor import OperatorKind, basis_size


@dataclass(frozen=True)
class ModelConfig:
    """Network shape. Defaults match the small cost-accuracy model (n=10, F_h=32)."""

    stencil_n: int = 10
    order_p: int = 2
    kind: OperatorKind = OperatorKind.DX
    f_h: int = 32
    graph_layers: int = 2
    mlp_hidden: int = 1
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "kind", OperatorKind.parse(self.kind))
        if self.f_h < 1 or self.graph_layers < 1 or self.mlp_hidden < 1:
            raise InvalidArgument("f_h, graph_layers and mlp_hidden must be >= 1")
        if self.stencil_n < 1:
            raise InvalidArgument("stencil_n must be >= 1")
        if self.order_p < self.kind.m:
            raise InvalidArgument(f"{self.kind.label} needs order_p >= {self.kind.m}")
        if self.activation != "tanh":
            raise InvalidArgument("only the tanh activation is supported")

    @property
    def n_moments(self):
        return basis_size(self.order_p)

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.label
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    epochs: int = 100
    batch_size: int = 128
    plateau_factor: float = 0.5
    plateau_patience: int = 50
    min_lr: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidArgument("Adam betas must lie in (0, 1)")
        if self.learning_rate <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise InvalidArgument("invalid learning rate, epoch count or batch size")

    def to_dict(self):
        return asdict(self)
