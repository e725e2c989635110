"""Viewpoint generation for the Loop, Helix and Random watching strategies.

All three strategies place cameras on the sphere of radius gamma.  Loop
and Helix share the same (theta, phi) grid; Helix traverses it as a
single continuous boustrophedon route (theta ascending on even phi
rings, descending on odd ones).  Random draws viewpoints uniformly and
is reproducible from its seed (NumPy PCG64, pinned).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Viewpoint


class StrategyKind(enum.Enum):
    LOOP = "loop"
    HELIX = "helix"
    RANDOM = "random"


def _exact_divisions(span: float, step: float) -> int:
    """Number of steps covering span, or raise if step does not divide it."""
    n = round(span / step)
    if n < 1 or abs(n * step - span) > 1e-9:
        raise ValueError(f"step {step} does not divide {span} degrees")
    return n


@dataclass(frozen=True)
class StrategySpec:
    """Parameters of one watching strategy.

    theta_step / phi_step apply to Loop and Helix (and must divide 360
    and 90 respectively); count and seed apply to Random.  gamma is the
    shared observation radius.
    """

    kind: StrategyKind
    gamma: float
    theta_step: float | None = None
    phi_step: float | None = None
    count: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.kind in (StrategyKind.LOOP, StrategyKind.HELIX):
            if self.theta_step is None or self.phi_step is None:
                raise ValueError(f"{self.kind.value} strategy requires theta_step and phi_step")
            if self.theta_step <= 0 or self.phi_step <= 0:
                raise ValueError("angle steps must be > 0")
            _exact_divisions(360.0, self.theta_step)
            _exact_divisions(90.0, self.phi_step)
        else:
            if self.count is None or self.count < 1:
                raise ValueError("random strategy requires count >= 1")

    def n_viewpoints(self) -> int:
        """Viewpoint count this spec will generate."""
        if self.kind is StrategyKind.RANDOM:
            assert self.count is not None
            return self.count
        n_theta = _exact_divisions(360.0, self.theta_step)
        n_phi = _exact_divisions(90.0, self.phi_step)
        return n_theta * (n_phi + 1)


def _grid(spec: StrategySpec) -> tuple[list[float], list[float]]:
    n_theta = _exact_divisions(360.0, spec.theta_step)
    n_phi = _exact_divisions(90.0, spec.phi_step)
    thetas = [i * spec.theta_step for i in range(n_theta)]
    phis = [min(i * spec.phi_step, 90.0) for i in range(n_phi + 1)]
    return thetas, phis


def generate(spec: StrategySpec) -> list[Viewpoint]:
    """Generate the ordered viewpoint list for a strategy spec."""
    if spec.kind is StrategyKind.LOOP:
        thetas, phis = _grid(spec)
        return [Viewpoint(t, p, spec.gamma) for p in phis for t in thetas]

    if spec.kind is StrategyKind.HELIX:
        thetas, phis = _grid(spec)
        out: list[Viewpoint] = []
        for ring, p in enumerate(phis):
            ordered = thetas if ring % 2 == 0 else thetas[::-1]
            out.extend(Viewpoint(t, p, spec.gamma) for t in ordered)
        return out

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    draws = rng.random((spec.count, 2))
    return [
        Viewpoint(360.0 * u, 90.0 * v, spec.gamma)
        for u, v in draws
    ]
