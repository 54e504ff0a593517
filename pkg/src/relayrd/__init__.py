"""Rate-distortion bounds for relay-assisted interactive source coding.

Modules: :mod:`probcore` (distributions, information measures),
:mod:`rdsolve` (point-to-point rate-distortion family), :mod:`dscd` and
:mod:`cascade` (bounds for the two relay schemes), :mod:`regions`
(scalarised regions, hulls, scenarios) and :mod:`cli`.
"""

__version__ = "0.1.0"
