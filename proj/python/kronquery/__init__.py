"""Kronecker matrix-vector query experiments.

Thin re-export of the compiled `_kronquery` module. When installed as a wheel
the extension lives inside this package; in a CMake build tree it sits on
PYTHONPATH next to it.
"""

try:
    from ._kronquery import *  # noqa: F401,F403
    from ._kronquery import __version__  # noqa: F401
except ImportError:  # build-tree layout
    from _kronquery import *  # noqa: F401,F403
    from _kronquery import __version__  # noqa: F401
