"""Dense float64 tensors and the recording tape for reverse-mode differentiation."""
import contextlib
import contextvars
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from cife.core.errors import ShapeError

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar(
    "cife_active_tape", default=None
)


class Tensor:
    """
    n-dimensional float64 array that can take part in a recorded computation.

    Leaf tensors created with ``requires_grad=True`` (parameters, or inputs
    under a gradient check) receive a ``grad`` buffer of identical shape
    when ``backward`` reaches them.
    """

    __slots__ = ("data", "grad", "requires_grad", "node_id", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.node_id: Optional[int] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape)
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Copy of the underlying values."""
        return self.data.copy()

    def detach(self) -> "Tensor":
        """Same values, cut from any recorded graph."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    # Operator sugar; the functional forms live in cife.autodiff.ops
    def __add__(self, other: "Tensor") -> "Tensor":
        from cife.autodiff.ops import add
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from cife.autodiff.ops import sub
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from cife.autodiff.ops import mul
        return mul(self, other)

    def __truediv__(self, other: "Tensor") -> "Tensor":
        from cife.autodiff.ops import div
        return div(self, other)

    def __neg__(self) -> "Tensor":
        from cife.autodiff.ops import neg
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from cife.autodiff.ops import matmul
        return matmul(self, other)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"


@dataclass
class TapeEntry:
    """One recorded operation."""
    op: str
    inputs: Tuple[Tensor, ...]
    input_ids: Tuple[int, ...]
    output_id: int
    backward: BackwardRule


class Tape:
    """
    Ordered record of differentiable operations.

    Entries are appended in execution order, so every entry's inputs are
    produced before it. Use as a context manager to make it the tape that
    operations record onto:

        >>> with Tape() as tape:
        ...     loss = ops.sum(ops.mul(x, x))
        >>> backward(loss, tape)
    """

    def __init__(self):
        self.entries: List[TapeEntry] = []
        self._ids: Dict[int, int] = {}
        self._tensors: Dict[int, Tensor] = {}
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.entries)

    def node_id(self, tensor: Tensor) -> int:
        """Stable id of a tensor within this tape, assigned on first sight."""
        key = id(tensor)
        if key not in self._ids:
            node = len(self._ids)
            self._ids[key] = node
            self._tensors[node] = tensor
        node = self._ids[key]
        tensor.node_id = node
        return node

    def tensor(self, node: int) -> Tensor:
        return self._tensors[node]

    def contains(self, tensor: Tensor) -> bool:
        return id(tensor) in self._ids

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, rule: BackwardRule):
        input_ids = tuple(self.node_id(t) for t in inputs)
        output_id = self.node_id(output)
        self.entries.append(
            TapeEntry(op=op, inputs=tuple(inputs), input_ids=input_ids, output_id=output_id, backward=rule)
        )


def active_tape() -> Optional[Tape]:
    """Tape currently recording, if any."""
    return _ACTIVE_TAPE.get()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Suspend recording for evaluation-only forward passes."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)


def make_result(op: str, value: np.ndarray, inputs: Sequence[Tensor], rule: BackwardRule) -> Tensor:
    """
    Wrap an op's forward value, recording it when a tape is active and any
    input needs a gradient.
    """
    needs_grad = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs_grad)
    tape = active_tape()
    if tape is not None and needs_grad:
        tape.record(op, inputs, out, rule)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """
    Propagate d(loss)/d(node) backwards over the tape.

    Gradients reaching a node from several consumers are summed. Leaf
    tensors with ``requires_grad`` accumulate into ``grad`` (added to any
    gradient already present); leaves the loss does not depend on are
    left untouched.

    Args:
        loss: Scalar tensor produced while ``tape`` was recording
        tape: Tape holding the operations that produced ``loss``

    Raises:
        ShapeError: If ``loss`` is not a scalar
    """
    if loss.data.size != 1:
        raise ShapeError("backward", loss.shape)
    if not tape.contains(loss):
        return

    grads: Dict[int, np.ndarray] = {tape.node_id(loss): np.ones_like(loss.data)}
    produced = set()
    for entry in reversed(tape.entries):
        produced.add(entry.output_id)
        upstream = grads.pop(entry.output_id, None)
        if upstream is None:
            continue
        input_grads = entry.backward(upstream)
        for tensor, node, grad in zip(entry.inputs, entry.input_ids, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if node in grads:
                grads[node] = grads[node] + grad
            else:
                grads[node] = grad

    for node, grad in grads.items():
        if node in produced:
            continue
        leaf = tape.tensor(node)
        if not leaf.requires_grad:
            continue
        grad = np.asarray(grad, dtype=np.float64).reshape(leaf.shape)
        leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad
