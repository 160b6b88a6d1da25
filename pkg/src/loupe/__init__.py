"""loupe: numerics laboratory for planar Brownian motion.

Computes and cross-validates harmonic and excursion measure, Brownian bubble
and loop masses, logarithmic capacity, conformal radius, the normalized loop
measure, and Loewner-driven curve statistics.
"""

__version__ = "0.1.0"
