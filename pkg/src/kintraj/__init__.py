"""Exact kinetic trajectories and kinetic Poincare diagnostics."""
