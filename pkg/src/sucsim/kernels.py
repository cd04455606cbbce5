"""Backend selection for the hot loops.

The compiled extension is used when importable; ``SUCSIM_BACKEND=python``
forces the numpy fallback, ``SUCSIM_BACKEND=cython`` makes a missing
extension an import error.
"""
import os

from . import _pykernels

_requested = os.environ.get("SUCSIM_BACKEND", "").lower()

if _requested == "python":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _pykernels

BACKEND = _impl.BACKEND

ni_encrypt = _impl.ni_encrypt
ni_decrypt = _impl.ni_decrypt
ni_rounds = _impl.ni_rounds
i_apply = _impl.i_apply
i_rounds = _impl.i_rounds
enumerate_involutive_optimal = _impl.enumerate_involutive_optimal


def available_backends():
    mods = {"python": _pykernels}
    try:
        from . import _ckernels

        mods["cython"] = _ckernels
    except ImportError:
        pass
    return mods
