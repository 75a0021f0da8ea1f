"""Steady-state simulator of a single-chip photonic deep neural network.

Submodules follow the signal path: ``devices`` (per-component transfer
functions), ``optics`` (image formation and pixel routing), ``network``
(the 30-4-3-2 forward path), ``training`` (constrained digital twin and
weight compilation), ``calibration`` (ring alignment and threshold fitting),
``dataset`` (synthetic printed letters) and ``pipeline``/``cli``.
"""

__version__ = "0.1.0"
