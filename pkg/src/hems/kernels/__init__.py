"""Hot loops of the simulator and oracle.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
pure-Python ``_pykernels`` take over. Set ``HEMS_PURE_PYTHON=1`` to force the
fallback. Both backends produce bit-identical results.
"""

import os

from hems.kernels import _pykernels

if os.environ.get("HEMS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from hems.kernels import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

rollout = _impl.rollout
batch_costs = _impl.batch_costs
backward_induction = _impl.backward_induction

__all__ = ["BACKEND", "rollout", "batch_costs", "backward_induction"]
