"""Structure-preserving Lagrangian solvers for gradient flows.

Trajectory-based schemes with variable-step BDF2 time discretization for
non-conservative (phase-field) and conservative (porous-medium,
Fokker-Planck, Keller-Segel) dynamics in one and two dimensions, with the
adaptive step controller and the desk-scale experiment presets.
"""

__version__ = "0.1.0"
