"""Sidecar JSONL run log.

Wall-clock timestamps and durations are written here and nowhere else, so the
artifacts of a run stay byte-reproducible. One line per event::

    {"seq": 4, "event": "epoch_end", "component": "Trainer", "run": "desk",
     "run_id": "...", "span": "...", "parent": "...", "time": "...",
     "duration_ms": 812.4, "status": "ok", "data": {"epoch": 3, ...}}
"""

from __future__ import annotations

import itertools
import json
import threading
import time
import uuid
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import asdict, dataclass, field
from datetime import UTC, datetime
from pathlib import Path
from typing import IO, Any

_open_spans: ContextVar[tuple[str, ...]] = ContextVar("shno_open_spans", default=())


def _new_id() -> str:
    return uuid.uuid4().hex[:16]


@dataclass
class RunEvent:
    seq: int
    event: str
    component: str
    run: str
    run_id: str
    span: str
    time: str
    data: dict[str, Any]
    parent: str | None = None
    duration_ms: float | None = None
    status: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=str)


@dataclass
class Span:
    """An open span; entries added to ``data`` go into its end event."""

    name: str
    component: str
    id: str = ""
    data: dict[str, Any] = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)

    @property
    def elapsed_ms(self) -> float:
        return (time.perf_counter() - self.started) * 1000.0


class Tracer:
    """Appends run events to a JSONL file; a no-op until :meth:`configure`.

    Usage::

        from shno.utils.tracer import tracer

        tracer.configure(Path("runs/desk/run_log.jsonl"), run="desk")
        with tracer.span("epoch", "Trainer", {"epoch": 3}) as span:
            ...
            span.data["train_loss"] = loss
        tracer.close()
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._sink: IO[str] | None = None
        self._seq = itertools.count()
        self.run = ""
        self.run_id = ""

    @property
    def enabled(self) -> bool:
        return self._sink is not None

    def configure(self, path: Path, run: str = "") -> None:
        """Start a new run id and append to ``path`` (created with its parents)."""
        path = Path(path).resolve()
        path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            if self._sink is not None:
                self._sink.close()
            self._sink = path.open("a", encoding="utf-8")
            self._seq = itertools.count()
            self.run = run
            self.run_id = _new_id()

    def close(self) -> None:
        with self._lock:
            if self._sink is not None:
                self._sink.close()
                self._sink = None

    def reset(self) -> None:
        self.close()
        self.run = ""
        self.run_id = ""

    def emit(
        self,
        event: str,
        component: str,
        data: dict[str, Any] | None = None,
        *,
        span: str | None = None,
        duration_ms: float | None = None,
        status: str | None = None,
    ) -> RunEvent | None:
        if self._sink is None:
            return None
        open_spans = _open_spans.get()
        if span is not None and open_spans and open_spans[-1] == span:
            open_spans = open_spans[:-1]

        with self._lock:
            if self._sink is None:
                return None
            record = RunEvent(
                seq=next(self._seq),
                event=event,
                component=component,
                run=self.run,
                run_id=self.run_id,
                span=span or _new_id(),
                time=datetime.now(UTC).isoformat(),
                data=dict(data or {}),
                parent=open_spans[-1] if open_spans else None,
                duration_ms=duration_ms,
                status=status,
            )
            self._sink.write(record.to_json() + "\n")
            self._sink.flush()
        return record

    @contextmanager
    def span(self, name: str, component: str, data: dict[str, Any] | None = None) -> Iterator[Span]:
        """``<name>_start`` and ``<name>_end`` events around the block.

        The end event carries the duration and ``status`` ``ok`` or the name of
        the exception that left the block.
        """
        current = Span(name=name, component=component, data=dict(data or {}))
        if not self.enabled:
            yield current
            return

        current.id = _new_id()
        token = _open_spans.set((*_open_spans.get(), current.id))
        self.emit(f"{name}_start", component, data, span=current.id)
        status = "ok"
        try:
            yield current
        except BaseException as exc:
            status = type(exc).__name__
            raise
        finally:
            _open_spans.reset(token)
            elapsed = current.elapsed_ms
            self.emit(
                f"{name}_end",
                component,
                {**current.data, "duration_ms": round(elapsed, 2)},
                span=current.id,
                duration_ms=elapsed,
                status=status,
            )


tracer = Tracer()
