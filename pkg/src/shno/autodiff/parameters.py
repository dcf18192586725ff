"""Named parameter tensors shared by the attention blocks, the network and the optimizer."""

from __future__ import annotations

from collections.abc import Iterator, Mapping

import numpy as np

from shno.autodiff.complex import ComplexTensor
from shno.autodiff.tensor import Tensor
from shno.errors import ShapeError


class ParameterStore:
    """Ordered ``name -> Tensor`` registry.

    Complex parameters are stored as two real entries ``<name>.re`` and
    ``<name>.im``. Insertion order is the canonical order used by the optimizer
    and by checkpoints.
    """

    def __init__(self) -> None:
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, value: np.ndarray | float) -> Tensor:
        if name in self._tensors:
            raise KeyError(f"parameter {name!r} already registered")
        tensor = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._tensors[name] = tensor
        return tensor

    def add_complex(self, name: str, value: np.ndarray) -> ComplexTensor:
        value = np.asarray(value, dtype=np.complex128)
        return ComplexTensor(self.add(f"{name}.re", value.real), self.add(f"{name}.im", value.imag))

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError:
            raise KeyError(f"no parameter named {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def complex(self, name: str) -> ComplexTensor:
        return ComplexTensor(self[f"{name}.re"], self[f"{name}.im"])

    def scope(self, prefix: str) -> ParameterScope:
        return ParameterScope(self, prefix)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._tensors.items())

    def tensors(self) -> list[Tensor]:
        return list(self._tensors.values())

    def count(self) -> int:
        """Total number of real scalars."""
        return sum(t.size for t in self._tensors.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_state_dict(self, values: Mapping[str, np.ndarray]) -> None:
        """Copy ``values`` into the registered tensors; names and shapes must match exactly."""
        missing = set(self._tensors) - set(values)
        extra = set(values) - set(self._tensors)
        if missing or extra:
            raise KeyError(f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, t in self._tensors.items():
            value = np.asarray(values[name], dtype=np.float64)
            if value.shape != t.shape:
                raise ShapeError(f"parameter {name!r}: stored shape {value.shape}, expected {t.shape}")
            t.data[...] = value


class ParameterScope:
    """A view of a :class:`ParameterStore` under a dotted prefix."""

    def __init__(self, store: ParameterStore, prefix: str):
        self.store = store
        self.prefix = prefix

    def _name(self, name: str) -> str:
        return f"{self.prefix}.{name}" if self.prefix else name

    def add(self, name: str, value: np.ndarray | float) -> Tensor:
        return self.store.add(self._name(name), value)

    def add_complex(self, name: str, value: np.ndarray) -> ComplexTensor:
        return self.store.add_complex(self._name(name), value)

    def __getitem__(self, name: str) -> Tensor:
        return self.store[self._name(name)]

    def __contains__(self, name: str) -> bool:
        return self._name(name) in self.store

    def complex(self, name: str) -> ComplexTensor:
        return self.store.complex(self._name(name))

    def scope(self, prefix: str) -> ParameterScope:
        return ParameterScope(self.store, self._name(prefix))
