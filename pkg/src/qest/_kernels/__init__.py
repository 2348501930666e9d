"""Hot-kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly; the
NumPy implementation is the fallback. Set QEST_KERNELS=python (or =cython)
to force a backend, e.g. for the comparison benchmark.
"""
import os

_requested = os.environ.get("QEST_KERNELS", "auto").strip().lower()

if _requested in ("auto", "", "cython", "cy", "compiled"):
    try:
        from . import cykernels as _impl

        BACKEND = "cython"
    except ImportError:
        if _requested in ("cython", "cy", "compiled"):
            raise
        from . import pykernels as _impl

        BACKEND = "python"
elif _requested in ("python", "py", "numpy"):
    from . import pykernels as _impl

    BACKEND = "python"
else:
    raise ValueError(f"unknown QEST_KERNELS value: {_requested!r}")

posterior_products = _impl.posterior_products
tangency_batch = _impl.tangency_batch
random_scheme_run = _impl.random_scheme_run
greedy_mc_run = _impl.greedy_mc_run


def backend_name() -> str:
    return BACKEND
