"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementations in ``_pykernels`` are used.  Setting the environment
variable ``DMPFEM_PURE_PYTHON=1`` forces the numpy backend.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("DMPFEM_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def use_backend(name):
    """Switch backend at runtime ('cython' or 'python'); returns the previous one."""
    global _impl, BACKEND
    prev = BACKEND
    if name == "python":
        _impl = _pykernels
    elif name == "cython":
        from . import _ckernels

        _impl = _ckernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    return prev


def available_backends():
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401

        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def simplex_geometry(coords):
    return _impl.simplex_geometry(coords)


def local_blocks(q, vol, dk, phi, w, bq, cq, fq):
    return _impl.local_blocks(q, vol, dk, phi, w, bq, cq, fq)


def patch_normal_equations(ptr, nodes, points, values):
    return _impl.patch_normal_equations(ptr, nodes, points, values)


monomials = _pykernels.monomials
