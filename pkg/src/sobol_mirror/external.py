"""Evaluate a model living in a separate process.

Wire protocol (newline-delimited ASCII, ``.`` decimal separator):

1. parent -> child: ``SOBOL-MIRROR-PROTO 1 <p>``
2. child -> parent: ``OK``
3. then repeatedly: parent sends ``p`` space-separated floats formatted with
   ``%.17g``; child answers with one float on one line.

The child stays alive between calls.  Closing stdin tells it to exit.
"""

from __future__ import annotations

import atexit
import math
import os
import selectors
import subprocess

import numpy as np

from .errors import EvaluationError

PROTOCOL_HEADER = "SOBOL-MIRROR-PROTO 1"
DEFAULT_TIMEOUT = 30.0


def format_request(x) -> str:
    return " ".join("%.17g" % float(v) for v in x) + "\n"


class ExternalEvaluator:
    """Callable wrapper around a child process speaking the line protocol."""

    def __init__(self, command, p: int, timeout: float = DEFAULT_TIMEOUT):
        self.command = list(command)
        self.p = int(p)
        self.timeout = timeout
        self.calls = 0
        self._buffer = b""
        self._proc = None
        self._start()

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                bufsize=0,
            )
        except OSError as exc:
            raise EvaluationError(f"cannot start external model {self.command}: {exc}") from exc
        self._send(f"{PROTOCOL_HEADER} {self.p}\n", request="<handshake>")
        answer = self._readline(request="<handshake>")
        if answer.strip() != "OK":
            self.close()
            raise EvaluationError(f"external model refused handshake: {answer.strip()!r}")

    def _send(self, text: str, request: str):
        try:
            self._proc.stdin.write(text.encode("ascii"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluationError(f"external model exited (request {request.strip()!r})") from exc

    def _readline(self, request: str) -> str:
        fd = self._proc.stdout.fileno()
        with selectors.DefaultSelector() as sel:
            sel.register(fd, selectors.EVENT_READ)
            while b"\n" not in self._buffer:
                if not sel.select(self.timeout):
                    self.close()
                    raise EvaluationError(
                        f"external model timed out after {self.timeout} s (request {request.strip()!r})"
                    )
                chunk = os.read(fd, 65536)
                if not chunk:
                    code = self._proc.poll()
                    raise EvaluationError(
                        f"external model exited with code {code} (request {request.strip()!r})"
                    )
                self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line.decode("ascii", errors="replace")

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise ValueError(f"expected {self.p} inputs, got shape {x.shape}")
        request = format_request(x)
        self._send(request, request)
        line = self._readline(request)
        try:
            value = float(line.strip())
        except ValueError:
            raise EvaluationError(f"unparsable response {line!r} to request {request.strip()!r}", inputs=x)
        if not math.isfinite(value):
            raise EvaluationError(f"non-finite response {line.strip()!r} to request {request.strip()!r}", inputs=x)
        self.calls += 1
        return value

    @property
    def alive(self) -> bool:
        return self._proc is not None and self._proc.poll() is None

    def close(self):
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
        proc.stdout.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# one child per (command, p) per worker process
_REGISTRY: dict = {}


def evaluator_for(command, p: int) -> ExternalEvaluator:
    key = (tuple(command), int(p), os.getpid())
    ev = _REGISTRY.get(key)
    if ev is None or not ev.alive:
        ev = ExternalEvaluator(command, p)
        _REGISTRY[key] = ev
    return ev


def eval_external(command, x) -> float:
    """Evaluate one point through a (cached) child process."""
    x = np.asarray(x, dtype=float)
    return evaluator_for(command, x.shape[0])(x)


@atexit.register
def close_all():
    for ev in list(_REGISTRY.values()):
        ev.close()
    _REGISTRY.clear()
