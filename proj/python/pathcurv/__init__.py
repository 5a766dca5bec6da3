"""Monte Carlo checks of path-space curvature inequalities on model manifolds.

The heavy lifting lives in the compiled extension; this package re-exports
its entry points. Configs are flat string dicts with dotted keys, identical
to the CLI config format (see ``list_presets()`` for the catalogs).
"""

from ._core import (
    ConfigError,
    InconclusivePower,
    NoBackend,
    format_double,
    list_presets,
    run,
    run_text,
    sweep,
)

__all__ = [
    "ConfigError",
    "InconclusivePower",
    "NoBackend",
    "format_double",
    "list_presets",
    "run",
    "run_text",
    "sweep",
]
