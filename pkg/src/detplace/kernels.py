"""Kernel selection.

The compiled ``_ckernels`` extension is used when it is importable; the
pure-Python twin in ``_pykernels`` is the fallback.  Setting the environment
variable ``DETPLACE_PURE_PYTHON=1`` forces the fallback.
"""
import os

from detplace import _pykernels

BACKEND = "python"
serial_sgs = _pykernels.serial_sgs
ls_schedule = _pykernels.ls_schedule

if os.environ.get("DETPLACE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from detplace import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        serial_sgs = _ckernels.serial_sgs
        ls_schedule = _ckernels.ls_schedule

__all__ = ["BACKEND", "serial_sgs", "ls_schedule"]
