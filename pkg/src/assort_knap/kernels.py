"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
reference takes over. ``ASSORT_KNAP_BACKEND=python`` forces the fallback,
``ASSORT_KNAP_BACKEND=compiled`` makes a missing extension an import error.
"""
import importlib
import os

from . import _pykernels

OPTIMAL = _pykernels.OPTIMAL
INFEASIBLE = _pykernels.INFEASIBLE
UNBOUNDED = _pykernels.UNBOUNDED
ITERATION_LIMIT = _pykernels.ITERATION_LIMIT

NO_PURCHASE = _pykernels.NO_PURCHASE
HORIZON = _pykernels.HORIZON
MEMBER_INFEASIBLE = _pykernels.MEMBER_INFEASIBLE


def load_backend(name):
    """Return the kernel module for ``name`` ('compiled' or 'python')."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        return importlib.import_module("assort_knap._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


def _select():
    wanted = os.environ.get("ASSORT_KNAP_BACKEND", "auto")
    if wanted == "auto":
        try:
            return "compiled", load_backend("compiled")
        except ImportError:
            return "python", _pykernels
    return wanted, load_backend(wanted)


BACKEND, _impl = _select()

simplex = _impl.simplex
reduced_bvn = _impl.reduced_bvn
run_epoch = _impl.run_epoch
