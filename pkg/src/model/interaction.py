"""
Interaction Module

Finite-range pair interaction U(x) = sum_{i<j} Phi(|x_i - x_j|) with Phi
tabulated on the nonnegative integers and cut off beyond r0.
"""

import itertools
import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from geometry.cube_geometry import ParticlePoint


class InteractionSpec(BaseModel):
    """
    Pair potential table, range and amplitude.

    phi_energy[k] is Phi(r) for k <= r < k + 1; when omitted the bump
    Phi = 1 on [0, r0] is used.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    r0_grid_units: float = Field(default=1.0, ge=0)
    h: float = 0.0
    phi_energy: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_table(self):
        needed = math.floor(self.r0_grid_units) + 1
        if self.phi_energy is not None:
            if len(self.phi_energy) < needed:
                raise ValueError(f"phi_energy needs at least {needed} entries to cover r0={self.r0_grid_units}")
            if not all(math.isfinite(v) for v in self.phi_energy):
                raise ValueError("phi_energy entries must be finite")
        return self

    @property
    def table(self) -> np.ndarray:
        """Phi on 0..floor(r0); entries beyond r0 are never read."""
        needed = math.floor(self.r0_grid_units) + 1
        if self.phi_energy is None:
            return np.ones(needed)
        return np.asarray(self.phi_energy[:needed], dtype=float)

    @property
    def bound(self) -> float:
        """sup |Phi|."""
        return float(np.max(np.abs(self.table)))

    def with_amplitude(self, h: float) -> "InteractionSpec":
        return self.model_copy(update={"h": h})


def phi(r: np.ndarray, spec: InteractionSpec) -> np.ndarray:
    """Phi(r) = table[floor(r)] for r <= r0 and 0 beyond."""
    r = np.asarray(r, dtype=float)
    table = spec.table
    inside = r <= spec.r0_grid_units
    index = np.clip(np.floor(r).astype(np.int64), 0, table.size - 1)
    return np.where(inside, table[index], 0.0)


def pair_potential_sum(coords: np.ndarray, spec: InteractionSpec) -> np.ndarray:
    """
    U on a batch of configurations.

    Args:
        coords: (m, n, d) physical coordinates

    Returns:
        (m,) array of sum_{i<j} Phi(|x_i - x_j|), max-norm distances
    """
    coords = np.asarray(coords, dtype=float)
    total = np.zeros(coords.shape[0])
    for i, j in itertools.combinations(range(coords.shape[1]), 2):
        distance = np.max(np.abs(coords[:, i, :] - coords[:, j, :]), axis=1)
        total += phi(distance, spec)
    return total


def interaction_potential(x: ParticlePoint, spec: InteractionSpec) -> float:
    """U(x) for a single lattice configuration; 0 for n = 1."""
    coords = x.as_array()[None, :, :]
    return float(pair_potential_sum(coords, spec)[0])
