"""Selects the stepping backend at import time.

The compiled extension is preferred when present; the numpy fallback is
always available. Set TUMBLEKIT_BACKEND=python or =compiled to force one
(forcing the compiled backend raises if it was never built).
"""

import os

_requested = os.environ.get("TUMBLEKIT_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _stepper_py as _impl

    BACKEND = "python"
elif _requested == "compiled":
    from . import _stepper as _impl

    BACKEND = "compiled"
elif _requested == "":
    try:
        from . import _stepper as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _stepper_py as _impl

        BACKEND = "python"
else:
    raise RuntimeError(
        f"TUMBLEKIT_BACKEND={_requested!r}; expected 'python' or 'compiled'"
    )

run_transport = _impl.run_transport
