"""Human-guided motion planning engine for a 7-DOF serial manipulator."""

__version__ = "0.1.0"
