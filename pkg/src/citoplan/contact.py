"""Complementarity conditions for terrain contact.

Each contact point contributes four scalar complementarity pairs built from
four variables: the normal force ``lambda_N``, a two-component nonnegative
tangential force ``lambda_T`` (one entry per tangential direction, +x then
-x for the default terrain), and a slack ``gamma`` that equals the sliding
speed at the solution:

* distance:       0 <= lambda_N      perp  phi(q)                  >= 0
* sliding (x2):   0 <= lambda_T[d]   perp  gamma + (J_T qdot)[d]   >= 0
* friction cone:  0 <= gamma         perp  mu lambda_N - sum(lambda_T) >= 0

``gamma`` absorbs the sliding velocity so that the tangential conditions
stay linear; it is not a force and does not enter the dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from citoplan.dynamics import PlanarModel, PlanarState

PAIR_KINDS = ("distance", "sliding", "friction_cone")


@dataclass(frozen=True)
class ContactVars:
    """Contact variables for one knot or one simulation step.

    ``lam_N`` has one entry per contact, ``lam_T`` two (the +/- tangential
    directions), and ``gamma`` one.  Units are forces (N) in planning and
    impulses (N s) inside the time-stepping simulator; conversions happen at
    the simulator boundary.
    """

    lam_N: np.ndarray
    lam_T: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam_N", np.atleast_1d(np.asarray(self.lam_N, float)))
        object.__setattr__(self, "lam_T", np.atleast_1d(np.asarray(self.lam_T, float)))
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, float)))
        nc = self.lam_N.shape[-1]
        if self.lam_T.shape[-1] != 2 * nc or self.gamma.shape[-1] != nc:
            raise ValueError("contact variable sizes disagree: need (nc, 2nc, nc)")

    @property
    def num_contacts(self) -> int:
        return self.lam_N.shape[-1]

    @classmethod
    def zeros(cls, nc: int) -> "ContactVars":
        return cls(np.zeros(nc), np.zeros(2 * nc), np.zeros(nc))


@dataclass(frozen=True)
class ComplementarityPair:
    """One scalar pair (a, b) with both sides nonnegative and a*b = 0 at a
    solution, labeled by condition kind, contact index, and (for sliding)
    tangential direction."""

    a: float
    b: float
    kind: str
    contact: int
    component: int = 0

    def __post_init__(self):
        if self.kind not in PAIR_KINDS:
            raise ValueError(f"unknown pair kind '{self.kind}'")


def min_residual(a, b):
    """Elementwise min(a, b): zero exactly at complementarity solutions with
    nonnegative arguments."""
    return np.minimum(np.asarray(a, float), np.asarray(b, float))


def contact_pairs(model: PlanarModel, state: PlanarState, cvars: ContactVars,
                  mu: float | None = None,
                  height_offset: float = 0.0) -> list[ComplementarityPair]:
    """Instantiate the four complementarity pairs for every contact point at
    the given state and contact-variable values.

    ``height_offset`` raises the terrain by that amount when evaluating the
    distance pair, so pairs can be checked against a shifted surface.
    """
    if mu is None:
        mu = model.terrain.mu_nominal
    if cvars.num_contacts != model.num_contacts:
        raise ValueError(
            f"expected {model.num_contacts} contacts, got {cvars.num_contacts}"
        )
    phi = np.atleast_1d(model.normal_distance(state.q)) - height_offset
    _, JT = model.contact_jacobian(state.q)
    slide = JT @ state.qdot
    pairs = []
    for c in range(model.num_contacts):
        pairs.append(
            ComplementarityPair(float(cvars.lam_N[c]), float(phi[c]), "distance", c)
        )
        for d in range(2):
            pairs.append(
                ComplementarityPair(
                    float(cvars.lam_T[2 * c + d]),
                    float(cvars.gamma[c] + slide[2 * c + d]),
                    "sliding",
                    c,
                    d,
                )
            )
        cone = mu * cvars.lam_N[c] - cvars.lam_T[2 * c] - cvars.lam_T[2 * c + 1]
        pairs.append(
            ComplementarityPair(float(cvars.gamma[c]), float(cone), "friction_cone", c)
        )
    return pairs


def max_complementarity_violation(pairs: list[ComplementarityPair]) -> float:
    """Worst violation across pairs: negativity of either side or a nonzero
    product.  Zero exactly when every pair is solved."""
    worst = 0.0
    for p in pairs:
        worst = max(worst, -p.a, -p.b, abs(p.a * p.b))
    return worst
