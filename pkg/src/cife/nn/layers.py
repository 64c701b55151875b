"""Affine layers and multi-layer perceptrons."""
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Union

import numpy as np

from cife.autodiff import ops
from cife.autodiff.tensor import Tensor
from cife.core.errors import ShapeError
from cife.core.types import HeadKind

SeedLike = Union[int, np.random.SeedSequence]


@dataclass
class LinearLayer:
    """y = x · W + b with W of shape in×out."""
    in_features: int
    out_features: int
    weight: Tensor = field(default=None, repr=False)
    bias: Tensor = field(default=None, repr=False)

    def __post_init__(self):
        if self.in_features < 1 or self.out_features < 1:
            raise ValueError(
                f"layer widths must be positive, got {self.in_features}->{self.out_features}"
            )
        if self.weight is None:
            self.weight = Tensor(np.zeros((self.in_features, self.out_features)), requires_grad=True)
        if self.bias is None:
            self.bias = Tensor(np.zeros(self.out_features), requires_grad=True)
        if self.weight.shape != (self.in_features, self.out_features):
            raise ShapeError("LinearLayer.weight", self.weight.shape, (self.in_features, self.out_features))
        if self.bias.shape != (self.out_features,):
            raise ShapeError("LinearLayer.bias", self.bias.shape, (self.out_features,))

    def forward(self, x: Tensor) -> Tensor:
        return ops.add(ops.matmul(x, self.weight), self.bias)

    def parameters(self) -> List[Tensor]:
        return [self.weight, self.bias]


def init_parameters(layer: LinearLayer, seed: SeedLike) -> LinearLayer:
    """
    Glorot-uniform weights and zero biases.

    Weights are drawn from U[-√(6/(in+out)), +√(6/(in+out))] with a
    generator built from ``seed``, so equal seeds give equal layers.
    The layer is updated in place and returned.
    """
    rng = np.random.default_rng(seed)
    limit = np.sqrt(6.0 / (layer.in_features + layer.out_features))
    layer.weight.data[...] = rng.uniform(-limit, limit, size=(layer.in_features, layer.out_features))
    layer.bias.data[...] = 0.0
    layer.weight.zero_grad()
    layer.bias.zero_grad()
    return layer


@dataclass
class Mlp:
    """
    Stack of linear layers with ReLU between them and a configurable head.

    A SIGMOID head squashes the last layer to probabilities; IDENTITY and
    SOFTMAX_LOGITS return the raw last-layer output (softmax is applied by
    the loss or the predictor).
    """
    layers: List[LinearLayer]
    head: HeadKind = HeadKind.IDENTITY
    activation: str = "relu"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("Mlp needs at least one layer")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation: {self.activation}")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_features != nxt.in_features:
                raise ShapeError(
                    "Mlp width chain", (prev.in_features, prev.out_features), (nxt.in_features, nxt.out_features)
                )

    @classmethod
    def build(cls, widths: Sequence[int], head: HeadKind, seed: SeedLike) -> "Mlp":
        """
        Create and initialize an Mlp.

        Args:
            widths: [input, hidden..., output] widths
            head: Output head kind
            seed: Integer seed or SeedSequence; each layer gets a spawned child

        Returns:
            Initialized Mlp
        """
        if len(widths) < 2:
            raise ValueError(f"need at least input and output widths, got {list(widths)}")
        seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        children = seq.spawn(len(widths) - 1)
        layers = [
            init_parameters(LinearLayer(w_in, w_out), child)
            for w_in, w_out, child in zip(widths[:-1], widths[1:], children)
        ]
        return cls(layers=layers, head=head)

    @property
    def widths(self) -> List[int]:
        return [self.layers[0].in_features] + [layer.out_features for layer in self.layers]

    @property
    def input_width(self) -> int:
        return self.layers[0].in_features

    @property
    def output_width(self) -> int:
        return self.layers[-1].out_features

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.input_width:
            raise ShapeError("Mlp.forward", x.shape, (None, self.input_width))
        h = x
        for i, layer in enumerate(self.layers):
            h = layer.forward(h)
            if i < len(self.layers) - 1:
                h = ops.relu(h)
        if self.head is HeadKind.SIGMOID:
            h = ops.sigmoid(h)
        return h

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def parameters(self) -> List[Tensor]:
        params: List[Tensor] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def named_parameters(self) -> Dict[str, Tensor]:
        named = {}
        for i, layer in enumerate(self.layers):
            named[f"layers.{i}.weight"] = layer.weight
            named[f"layers.{i}.bias"] = layer.bias
        return named
