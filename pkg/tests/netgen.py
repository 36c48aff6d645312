"""Random valid circuit draws shared by the unit and acceptance tests."""

import numpy as np

from headrc.circuit import branch_impedances
from headrc.geometry import DipoleSource, HeadGeometry
from headrc.params import CircuitPoint
from headrc.tissue import Static, TissueSpec


def random_network(rng):
    r1 = rng.uniform(0.06, 0.10)
    g = HeadGeometry.from_thicknesses(r1, rng.uniform(3e-3, 1e-2), rng.uniform(4e-3, 1e-2))
    tissues = [TissueSpec(n, Static(10 ** rng.uniform(-3, 0), 10 ** rng.uniform(0, 7)))
               for n in ("brain", "skull", "scalp")]
    point = CircuitPoint(tuple(10 ** rng.uniform(-2, 2, 3)), rng.uniform(-0.95, 0.95),
                         10 ** rng.uniform(-2, 2), g.r3 * rng.uniform(0.8, 1.2))
    src = DipoleSource(10 ** rng.uniform(-9, -7), 10 ** rng.uniform(-4, -2),
                       rng.uniform(0, 0.97) * r1)
    f = 10 ** rng.uniform(1, np.log10(5e4))
    return branch_impedances(g, tissues, point, src, f)
