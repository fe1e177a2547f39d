"""Three-class vertebra diagnosis (normal / benign fracture / malignant fracture).

A desk-scale, CPU-only stack: synthetic spine-sequence generation, a
two-stream neighbor-comparison network built on a small numpy autograd
engine (numba-accelerated kernels with a pure-numpy fallback), imbalance-aware
sampling, the full loss set, macro metrics, and segmentation-mask repair.
"""

from vcfdiag.backend import active_backend, available_backends

__version__ = "0.1.0"

__all__ = ["active_backend", "available_backends", "__version__"]
