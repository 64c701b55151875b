"""Network assemblies for the source-only, DANN/CDAN and CIFE variants."""
import copy
import hashlib
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from cife.autodiff import ops
from cife.autodiff.tensor import Tensor
from cife.core.types import HeadKind, Variant
from cife.nn.layers import Mlp


@dataclass(frozen=True)
class ModelSpec:
    """
    Widths shared by every component.

    Extractors have ``extractor_hidden`` hidden layers; the classifier and
    both discriminators have a single hidden layer of ``head_hidden``.
    """
    extractor_hidden: Tuple[int, ...] = (64, 64)
    invariant_dim: int = 32
    specific_dim: int = 32
    head_hidden: int = 32

    def __post_init__(self):
        widths = list(self.extractor_hidden) + [self.invariant_dim, self.specific_dim, self.head_hidden]
        if any(w < 1 for w in widths):
            raise ValueError(f"all widths must be positive, got {self}")

    def to_record(self) -> Dict:
        record = asdict(self)
        record["extractor_hidden"] = list(self.extractor_hidden)
        return record

    @classmethod
    def from_record(cls, record: Dict) -> "ModelSpec":
        values = dict(record)
        values["extractor_hidden"] = tuple(values["extractor_hidden"])
        return cls(**values)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class AdaptationModel(ABC):
    """Common surface the objectives, trainer and probes work against."""

    variant: Variant

    @abstractmethod
    def components(self) -> Dict[str, Mlp]:
        """Named networks in a fixed order."""

    @property
    @abstractmethod
    def classifier(self) -> Mlp:
        ...

    @property
    @abstractmethod
    def domain_discriminator(self) -> Optional[Mlp]:
        ...

    @property
    def category_discriminator(self) -> Optional[Mlp]:
        return None

    @abstractmethod
    def invariant_features(self, x) -> Tensor:
        """Features the domain discriminator sees (F_s, or F for DANN)."""

    def specific_features(self, x) -> Optional[Tensor]:
        """Category-invariant features F_d(x), if the model has them."""
        return None

    @abstractmethod
    def classifier_input(self, x, specific: Optional[Tensor] = None) -> Tensor:
        """
        Input to C for rows ``x``.

        For CIFE models ``specific`` overrides F_d(x); the prediction
        procedure passes F_d of randomly drawn source rows here.
        """

    @property
    def input_dim(self) -> int:
        return self.invariant_extractor.input_width

    @property
    @abstractmethod
    def invariant_extractor(self) -> Mlp:
        ...

    @property
    def num_classes(self) -> int:
        return self.classifier.output_width

    @property
    def has_specific_features(self) -> bool:
        return self.variant.aligns_categories

    def parameters(self) -> List[Tensor]:
        params: List[Tensor] = []
        for net in self.components().values():
            params.extend(net.parameters())
        return params

    def extractor_parameters(self) -> List[Tensor]:
        """Parameters of the min players: extractors and classifier."""
        discriminators = {"D_d", "D_t", "D"}
        params: List[Tensor] = []
        for name, net in self.components().items():
            if name not in discriminators:
                params.extend(net.parameters())
        return params

    def discriminator_parameters(self) -> List[Tensor]:
        """Parameters of the max players."""
        params: List[Tensor] = []
        for name, net in self.components().items():
            if name in ("D_d", "D_t", "D"):
                params.extend(net.parameters())
        return params

    def named_parameters(self) -> Dict[str, Tensor]:
        named = {}
        for component, net in self.components().items():
            for name, tensor in net.named_parameters().items():
                named[f"{component}.{name}"] = tensor
        return named

    def checksum(self) -> str:
        """sha256 over every parameter's bytes, in a fixed order."""
        digest = hashlib.sha256()
        for name, tensor in self.named_parameters().items():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(tensor.data).tobytes())
        return digest.hexdigest()

    def clone(self) -> "AdaptationModel":
        return copy.deepcopy(self)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


@dataclass
class CifeModel(AdaptationModel):
    """
    Five-component model: F_s (domain-invariant extractor), F_d
    (domain-specific extractor), C (classifier over [F_d(x), F_s(x)]),
    D_d (domain discriminator, sigmoid) and D_t (category discriminator,
    softmax logits).
    """
    f_s: Mlp
    f_d: Mlp
    c: Mlp
    d_d: Mlp
    d_t: Mlp
    variant: Variant = Variant.CIFE_DANN

    def __post_init__(self):
        if not self.variant.aligns_categories:
            raise ValueError(f"CifeModel cannot represent variant {self.variant.value}")
        if self.c.input_width != self.f_s.output_width + self.f_d.output_width:
            raise ValueError(
                f"C input width {self.c.input_width} must equal m_s + m_d = "
                f"{self.f_s.output_width} + {self.f_d.output_width}"
            )
        if self.d_d.head is not HeadKind.SIGMOID or self.d_d.output_width != 1:
            raise ValueError("D_d must end in a single sigmoid unit")
        if self.d_t.head is not HeadKind.SOFTMAX_LOGITS or self.d_t.output_width != self.c.output_width:
            raise ValueError("D_t must end in K softmax logits")
        expected = self.f_s.output_width * (self.c.output_width if self.variant.conditioned else 1)
        if self.d_d.input_width != expected:
            raise ValueError(f"D_d input width {self.d_d.input_width} != {expected}")

    def components(self) -> Dict[str, Mlp]:
        return {"F_s": self.f_s, "F_d": self.f_d, "C": self.c, "D_d": self.d_d, "D_t": self.d_t}

    @property
    def classifier(self) -> Mlp:
        return self.c

    @property
    def domain_discriminator(self) -> Optional[Mlp]:
        return self.d_d

    @property
    def category_discriminator(self) -> Optional[Mlp]:
        return self.d_t

    @property
    def invariant_extractor(self) -> Mlp:
        return self.f_s

    def invariant_features(self, x) -> Tensor:
        return self.f_s(as_tensor(x))

    def specific_features(self, x) -> Optional[Tensor]:
        return self.f_d(as_tensor(x))

    def classifier_input(self, x, specific: Optional[Tensor] = None) -> Tensor:
        x = as_tensor(x)
        if specific is None:
            specific = self.f_d(x)
        return ops.concat(specific, self.f_s(x))


@dataclass
class DannModel(AdaptationModel):
    """
    Feature extractor F, classifier C and binary domain discriminator D.

    ``d`` is None for the source-only baseline.
    """
    f: Mlp
    c: Mlp
    d: Optional[Mlp] = None
    variant: Variant = Variant.DANN

    def __post_init__(self):
        if self.variant.aligns_categories:
            raise ValueError(f"DannModel cannot represent variant {self.variant.value}")
        if self.c.input_width != self.f.output_width:
            raise ValueError(f"C input width {self.c.input_width} != F output {self.f.output_width}")
        if self.variant.aligns_domains and self.d is None:
            raise ValueError(f"variant {self.variant.value} needs a domain discriminator")

    def components(self) -> Dict[str, Mlp]:
        nets = {"F": self.f, "C": self.c}
        if self.d is not None:
            nets["D"] = self.d
        return nets

    @property
    def classifier(self) -> Mlp:
        return self.c

    @property
    def domain_discriminator(self) -> Optional[Mlp]:
        return self.d

    @property
    def invariant_extractor(self) -> Mlp:
        return self.f

    def invariant_features(self, x) -> Tensor:
        return self.f(as_tensor(x))

    def classifier_input(self, x, specific: Optional[Tensor] = None) -> Tensor:
        return self.f(as_tensor(x))


def build_model(
    variant: Variant,
    input_dim: int,
    num_classes: int,
    spec: ModelSpec = ModelSpec(),
    seed: int = 0,
) -> AdaptationModel:
    """
    Create a freshly initialized model for ``variant``.

    Component seeds are spawned from ``seed`` in a fixed slot order
    (F_s/F, C, D_d/D, F_d, D_t), so the domain-invariant extractor of a
    DANN and a CIFE model built with one seed start from the same weights.

    Args:
        variant: Training variant
        input_dim: Input width d
        num_classes: Number of classes K
        spec: Component widths
        seed: Root seed

    Returns:
        CifeModel for CIFE variants, DannModel otherwise
    """
    if num_classes < 2:
        raise ValueError(f"need at least two classes, got {num_classes}")
    slots = np.random.SeedSequence(seed).spawn(5)
    hidden = list(spec.extractor_hidden)
    m_s, m_d, h = spec.invariant_dim, spec.specific_dim, spec.head_hidden
    disc_in = m_s * (num_classes if variant.conditioned else 1)

    f_s = Mlp.build([input_dim, *hidden, m_s], HeadKind.IDENTITY, slots[0])
    if variant.aligns_categories:
        return CifeModel(
            f_s=f_s,
            f_d=Mlp.build([input_dim, *hidden, m_d], HeadKind.IDENTITY, slots[3]),
            c=Mlp.build([m_d + m_s, h, num_classes], HeadKind.SOFTMAX_LOGITS, slots[1]),
            d_d=Mlp.build([disc_in, h, 1], HeadKind.SIGMOID, slots[2]),
            d_t=Mlp.build([m_d, h, num_classes], HeadKind.SOFTMAX_LOGITS, slots[4]),
            variant=variant,
        )
    d = Mlp.build([disc_in, h, 1], HeadKind.SIGMOID, slots[2]) if variant.aligns_domains else None
    return DannModel(
        f=f_s,
        c=Mlp.build([m_s, h, num_classes], HeadKind.SOFTMAX_LOGITS, slots[1]),
        d=d,
        variant=variant,
    )
