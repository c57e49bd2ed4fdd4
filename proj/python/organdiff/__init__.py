"""Python bindings for the organdiff native core.

Meshes are (vertices, faces) pairs of numpy arrays with shapes (n, 3) float64 and
(m, 3) uint32. Errors surface as UsageError (a ValueError), DataError (a
RuntimeError) or NumericError (an ArithmeticError).
"""

from ._core import (
    THETA_SIZE,
    DataError,
    NumericError,
    UsageError,
    alpha_bars,
    chamfer_l1,
    load_mesh,
    load_theta,
    make_icosphere,
    mlp_logits,
    positional_encode,
    qa,
    qa_report,
    reconstruct,
    set_metrics,
    split_counts,
    winding_numbers,
)

__version__ = "0.1.0"

__all__ = [
    "THETA_SIZE",
    "DataError",
    "NumericError",
    "UsageError",
    "alpha_bars",
    "chamfer_l1",
    "load_mesh",
    "load_theta",
    "make_icosphere",
    "mlp_logits",
    "positional_encode",
    "qa",
    "qa_report",
    "reconstruct",
    "set_metrics",
    "split_counts",
    "winding_numbers",
]
