"""Link-level Monte Carlo simulator for pulse-based particle communication.

One transmitter releases amplitude-modulated rectangular pulses of a single
molecule type into a channel dominated by directed, randomly fluctuating
flow; an array of transversely offset receivers matched-filters the
concentration, and diversity combining plus pilot-trained gain control and
equalization recover the symbols.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
