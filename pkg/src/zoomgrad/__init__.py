"""zoomgrad: deterministic simulator for quantized distributed optimization.

Nodes on a strongly connected digraph jointly minimize a sum of strongly
convex quadratics by alternating local gradient steps with a finite-time
quantized average consensus, re-parameterizing a shared mid-rise quantizer
(zoom-in / zoom-out) whenever the iterate repeats.  Everything protocol-side
is exact rational arithmetic; every random choice flows through one seeded
portable generator, so runs replay bit-for-bit.
"""

__version__ = "0.1.0"
