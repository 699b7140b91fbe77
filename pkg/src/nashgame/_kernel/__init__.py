"""Backend selection for the exact-update inner loop.

The compiled extension is preferred when present; otherwise a numpy
implementation of the same arithmetic is used. Set NASHGAME_BACKEND=python
to force the fallback (the benchmark and parity tests do this).
"""

import os

from ._slow import ALG_EXTRAGRADIENT, ALG_MIRROR, ALG_PAIR_COV, ALG_MIXTURE, ALG_PG

if os.environ.get("NASHGAME_BACKEND", "").lower() == "python":
    from ._slow import run_exact

    BACKEND = "python"
else:
    try:
        from ._fast import run_exact

        BACKEND = "compiled"
    except ImportError:
        from ._slow import run_exact

        BACKEND = "python"

__all__ = [
    "ALG_EXTRAGRADIENT",
    "ALG_MIRROR",
    "ALG_PAIR_COV",
    "ALG_MIXTURE",
    "ALG_PG",
    "BACKEND",
    "run_exact",
]
