"""Hot polynomial kernels: compiled when the extension is built, else pure Python."""
try:
    from ._ckernels import correct, derivatives

    BACKEND = "cython"
except ImportError:  # extension not built
    from ._kernels_py import correct, derivatives

    BACKEND = "python"

__all__ = ["BACKEND", "correct", "derivatives"]
