"""Element-based finite-volume solver for thermo-hydrodynamic journal-bearing lubrication.

The package discretises scalar transport equations with a cell-vertex
finite-volume scheme on finite-element grids (hexahedra, wedges and their
2-D restrictions), and builds on that kernel a cavitation-aware Reynolds
solver, a 3-D film energy solver, and a rigid-shaft equilibrium loop, all
driven by a plain-text case format through the ``lubfvm`` command line
tool.
"""

__version__ = "0.1.0"
