"""Selects between the compiled kernels and the pure python loops.

The compiled module hard-codes the stock systems, so a run can only use
it when the system carries a matching kernel tag; user-defined systems
always take the python path.
"""

try:
    from . import _kernels  # noqa: F401
    HAVE_KERNELS = True
except ImportError:
    HAVE_KERNELS = False


def resolve(requested, kernel_matches):
    """Map a backend request to a use-the-kernel decision.

    "auto" takes the kernel when it exists and covers this system,
    "python" never does, "compiled" insists and raises otherwise.
    """
    if requested == "python":
        return False
    if requested == "compiled":
        if not HAVE_KERNELS:
            raise RuntimeError("compiled kernels are not installed")
        if not kernel_matches:
            raise RuntimeError("no compiled kernel for this system")
        return True
    if requested == "auto":
        return HAVE_KERNELS and kernel_matches
    raise ValueError(f"unknown backend {requested!r}")
