"""degreelab: invariants of low-degree meromorphic surface maps.

Library surface:

* :mod:`degreelab.lattice`     -- intersection forms, spectral certificates
* :mod:`degreelab.models`      -- the built-in map families
* :mod:`degreelab.stability`   -- orbit checks and symbolic degree sequences
* :mod:`degreelab.currents`    -- pullback/pushforward potential series
* :mod:`degreelab.ergodic`     -- torus exponents and invariance checks
* :mod:`degreelab.contraction` -- self-intersection zero analysis
* :mod:`degreelab.cli`         -- the ``degreelab`` command
"""

__version__ = "0.1.0"

from .errors import DegreeLabError  # noqa: F401
