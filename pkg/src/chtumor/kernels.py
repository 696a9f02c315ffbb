"""Kernel backend selection.

The compiled extension is preferred when present; set ``CHTUMOR_PURE_PYTHON=1``
to force the NumPy fallback (used by the benchmark for comparison). Both
backends expose the same functions and agree to rounding.
"""

import os

if os.environ.get("CHTUMOR_PURE_PYTHON"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
quartic_psi = _impl.quartic_psi
poly_eval3 = _impl.poly_eval3
exchange_source = _impl.exchange_source
nutrient_potential = _impl.nutrient_potential
weighted_sq_integral = _impl.weighted_sq_integral
galerkin_eval = _impl.galerkin_eval
