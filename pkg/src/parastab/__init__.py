"""Stabilization criteria, decay envelopes and radial simulations for
semilinear parabolic equations."""

__version__ = "0.1.0"
