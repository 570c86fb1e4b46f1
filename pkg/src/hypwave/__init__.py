"""Numerical laboratory for the shifted wave equation on the hyperbolic plane.

The package splits along the structure of the underlying problem:

* :mod:`hypwave.hypgeo`      scalar kernels, envelopes, quadrature nodes
* :mod:`hypwave.meanprop`    spherical means, the sine propagator, Duhamel
* :mod:`hypwave.nonlin`      the logarithmic nonlinearity family
* :mod:`hypwave.globalsolver` weighted Picard iteration and decay checks
* :mod:`hypwave.blowlab`     blow-up sequences and certificates
* :mod:`hypwave.fdoracle`    independent finite-difference cross-check
* :mod:`hypwave.cli`         the ``wavecli`` command line front end
"""

__version__ = "0.1.0"
