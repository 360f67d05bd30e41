"""Reference child for the external-model protocol.

Serves a builtin model over stdin/stdout so that the external path can be
exercised end to end::

    python -m sobol_mirror.child disc
"""

import sys

import numpy as np

from .external import PROTOCOL_HEADER
from .models import make_model


def serve(name: str, stdin=sys.stdin, stdout=sys.stdout) -> int:
    header = stdin.readline().split()
    if len(header) != 3 or " ".join(header[:2]) != PROTOCOL_HEADER:
        stdout.write("ERR bad handshake\n")
        stdout.flush()
        return 1
    p = int(header[2])
    model = make_model(name, p=p)
    stdout.write("OK\n")
    stdout.flush()
    for line in stdin:
        x = [float(t) for t in line.split()]
        y = float(model._fn(np.array([x]))[0])
        stdout.write("%.17g\n" % y)
        stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(serve(sys.argv[1] if len(sys.argv) > 1 else "disc"))
