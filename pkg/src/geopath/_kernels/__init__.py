"""Hot-path kernels with a compiled core and a pure-numpy fallback.

The Monte Carlo harness spends nearly all its time in two operations: rolling
drivers onto the sphere (endpoints only) and evaluating the closed-form
log-density per driver.  Both exist twice: ``_core`` (Cython) and ``_pure``
(batched numpy).  The compiled module is preferred when importable; set
``GEOPATH_FORCE_PURE=1`` to pin the fallback (used by the parity tests and
the benchmark).
"""

import os

from . import _pure

BACKEND = "pure"
sphere_endpoints = _pure.sphere_endpoints
sphere_log_density = _pure.sphere_log_density

if not os.environ.get("GEOPATH_FORCE_PURE"):
    try:
        from . import _core

        sphere_endpoints = _core.sphere_endpoints
        sphere_log_density = _core.sphere_log_density
        BACKEND = "compiled"
    except ImportError:
        pass

__all__ = ["BACKEND", "sphere_endpoints", "sphere_log_density", "_pure"]
