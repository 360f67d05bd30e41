"""Drive a model that runs in another process.

The child reads ``SOBOL-MIRROR-PROTO 1 <p>``, answers ``OK``, then answers
each line of p numbers with one number.  Any language will do; here the
child is a few lines of Python written to a temporary file.
"""

# %%
import sys
import tempfile
import textwrap
from pathlib import Path

import numpy as np

from sobol_mirror import external_model, run

child = textwrap.dedent(
    """
    import math, sys
    sys.stdin.readline()
    print("OK", flush=True)
    for line in sys.stdin:
        a, b = (float(t) for t in line.split())
        print(repr(math.sin(a) + 0.5 * b * b), flush=True)
    """
)
path = Path(tempfile.mkdtemp()) / "model.py"
path.write_text(child)

# %%
model = external_model([sys.executable, str(path)], ["uniform(-3.14159,3.14159)", "uniform(-1,1)"], name="sine")
rep = run(model, horizon=40_000, seed=0)

# sin(a) has variance 1/2 and b**2 / 2 has variance (1/5 - 1/9) / 4; no interaction
v1, v2 = 0.5, (1 / 5 - 1 / 9) / 4
print("exact     ({1}, {2}, {1,2}):", np.round([v1 / (v1 + v2), v2 / (v1 + v2), 0.0], 3))
print("estimated ({1}, {2}, {1,2}):", np.round(rep.sobol_final[1:], 3))
print("evaluations:", rep.evals)
