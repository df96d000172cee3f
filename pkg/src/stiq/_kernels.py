"""Backend selection for the gate kernels.

The environment variable ``STIQ_KERNELS`` picks the implementation:

* ``auto`` (default): numba when it imports, numpy otherwise
* ``numba``: require the jitted kernels, fail loudly if numba is missing
* ``numpy``: force the pure-numpy path

Both backends expose ``run_ops`` and ``z_expectations`` with identical
semantics; ``get_backend`` hands out a specific one so tests and the
benchmark can compare them inside a single process.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_np
from ._kernels_np import (  # noqa: F401  (re-exported gate codes)
    G_CNOT,
    G_CRX,
    G_CRY,
    G_CRZ,
    G_H,
    G_RX,
    G_RY,
    G_RZ,
    G_X,
    G_Y,
    G_Z,
)


def get_backend(name: str) -> ModuleType:
    if name == "numpy":
        return _kernels_np
    if name == "numba":
        from . import _kernels_nb

        return _kernels_nb
    if name == "auto":
        try:
            from . import _kernels_nb

            return _kernels_nb
        except ImportError:
            return _kernels_np
    raise ValueError(f"unknown kernel backend {name!r}; use auto, numba or numpy")


_active = get_backend(os.environ.get("STIQ_KERNELS", "auto"))

BACKEND = _active.NAME
run_ops = _active.run_ops
z_expectations = _active.z_expectations
