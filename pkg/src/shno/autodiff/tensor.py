"""Dense float64 tensors and a define-by-run tape.

Every differentiable operation is a :class:`Function` subclass. Calling
``SomeOp.apply(...)`` computes the forward value on numpy arrays and, when a tape
is active and an input requires gradients, appends a :class:`TapeRecord`. The
tape is therefore already in topological order; :func:`backward` walks it in
reverse.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterator, Mapping
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from shno.errors import ShapeError

logger = logging.getLogger(__name__)

_ids = itertools.count(1)
_active_tape: ContextVar[Tape | None] = ContextVar("shno_active_tape", default=None)


class Tensor:
    """A float64 array that may participate in the active tape."""

    __slots__ = ("data", "requires_grad", "id", "name")
    __array_priority__ = 100

    def __init__(self, data: Any, requires_grad: bool = False, name: str = ""):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.id = next(_ids)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data, name=self.name)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # operator sugar; implementations live in shno.autodiff.ops

    def __add__(self, other: Any) -> Tensor:
        from shno.autodiff import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Any) -> Tensor:
        from shno.autodiff import ops

        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> Tensor:
        from shno.autodiff import ops

        return ops.sub(other, self)

    def __mul__(self, other: Any) -> Tensor:
        from shno.autodiff import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> Tensor:
        from shno.autodiff import ops

        return ops.div(self, other)

    def __rtruediv__(self, other: Any) -> Tensor:
        from shno.autodiff import ops

        return ops.div(other, self)

    def __neg__(self) -> Tensor:
        from shno.autodiff import ops

        return ops.neg(self)

    def __matmul__(self, other: Any) -> Tensor:
        from shno.autodiff import ops

        return ops.matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        from shno.autodiff import ops

        return ops.slice_(self, index)


def as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class Context:
    """Values a Function saves in forward for use in backward."""

    def __init__(self) -> None:
        self.saved: tuple[Any, ...] = ()
        self.data: dict[str, Any] = {}

    def save_for_backward(self, *values: Any) -> None:
        self.saved = values

    def save(self, **kwargs: Any) -> None:
        self.data.update(kwargs)


@dataclass
class TapeRecord:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    ctx: Context
    backward: Any


@dataclass
class Tape:
    """Ordered op records; usable as a context manager that activates it."""

    records: list[TapeRecord] = field(default_factory=list)
    enabled: bool = True
    _token: Any = field(default=None, repr=False)

    def __enter__(self) -> Tape:
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.records)

    def record(self, record: TapeRecord) -> None:
        self.records.append(record)


def active_tape() -> Tape | None:
    tape = _active_tape.get()
    if tape is None or not tape.enabled:
        return None
    return tape


@contextmanager
def no_grad() -> Iterator[None]:
    """Run forward ops without recording them."""
    token = _active_tape.set(None)
    try:
        yield
    finally:
        _active_tape.reset(token)


class Function:
    """Base class for taped operations.

    Subclasses implement ``forward(ctx, *arrays, **kwargs) -> ndarray`` on raw
    numpy data and ``backward(ctx, grad) -> tuple`` returning one gradient (or
    ``None``) per tensor input.
    """

    @staticmethod
    def forward(ctx: Context, *args: Any, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def backward(ctx: Context, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *tensors: Tensor, **kwargs: Any) -> Tensor:
        ctx = Context()
        out = Tensor(cls.forward(ctx, *(t.data for t in tensors), **kwargs))
        tape = active_tape()
        if tape is not None and any(t.requires_grad for t in tensors):
            out.requires_grad = True
            tape.record(TapeRecord(cls.__name__, tuple(tensors), out, ctx, cls.backward))
        return out


class Gradients(Mapping[int, np.ndarray]):
    """Gradient map keyed by tensor id; also indexable by the tensor itself."""

    def __init__(self, grads: dict[int, np.ndarray]):
        self._grads = grads

    def __getitem__(self, key: int | Tensor) -> np.ndarray:
        return self._grads[key.id if isinstance(key, Tensor) else key]

    def __contains__(self, key: object) -> bool:
        return (key.id if isinstance(key, Tensor) else key) in self._grads

    def __iter__(self) -> Iterator[int]:
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)

    def of(self, tensor: Tensor) -> np.ndarray:
        """Gradient of ``tensor``, zeros if it did not participate."""
        return self._grads.get(tensor.id, np.zeros_like(tensor.data))


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Reverse accumulation of d(loss)/d(tensor) over the tape.

    Only tensors that lie on a path to ``loss`` and require gradients appear in
    the result. Accumulation order is the reverse tape order, so results are
    deterministic.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.data)}
    for rec in reversed(tape.records):
        g_out = grads.get(rec.output.id)
        if g_out is None:
            continue
        g_in = rec.backward(rec.ctx, g_out)
        if len(g_in) != len(rec.inputs):
            raise RuntimeError(f"{rec.op}.backward returned {len(g_in)} grads for {len(rec.inputs)} inputs")
        for t, g in zip(rec.inputs, g_in, strict=True):
            if g is None or not t.requires_grad:
                continue
            if g.shape != t.data.shape:
                raise ShapeError(f"{rec.op} produced grad {g.shape} for input {t.data.shape}")
            if t.id in grads:
                grads[t.id] = grads[t.id] + g
            else:
                grads[t.id] = g
    return Gradients(grads)
