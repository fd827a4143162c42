"""Energy balance laboratory for extended dissipative systems on lattices."""
from .exceptions import LattedsError
from .lattice import Field
from .models import LatticeWindow

__version__ = "0.1.0"

__all__ = ["Field", "LatticeWindow", "LattedsError", "__version__"]
