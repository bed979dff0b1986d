"""Energy-optimal planning of cell-free massive MIMO over a virtualized C-RAN."""

__version__ = "0.1.0"
