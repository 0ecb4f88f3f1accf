"""Frequency-entangled photon pairs from a Sagnac fiber loop.

Subpackages and modules:

* :mod:`sagnacfwm.state` -- two-photon state algebra of the loop output
* :mod:`sagnacfwm.polarization` -- Jones-calculus pump mode matching
* :mod:`sagnacfwm.interference` -- temporal and spatial two-photon beats
* :mod:`sagnacfwm.counting` -- gated photon-counting model and scans
* :mod:`sagnacfwm.fitting` -- beat-curve fitting
* :mod:`sagnacfwm.cli` -- the ``sagnacfwm`` command
"""

__version__ = "0.1.0"
