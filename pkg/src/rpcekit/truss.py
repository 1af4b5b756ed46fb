"""Planar pin-jointed truss solved by the direct stiffness method.

The default geometry is a 23-bar Warren truss: 24 m span in six 4 m bays,
2 m deep, seven bottom-chord nodes, six top-chord nodes carrying the loads
P1..P6, pinned at the left support and on a roller at the right. Bars are
grouped as horizontal (``h``, chords) or oblique (``o``, diagonals); each
group shares a Young's modulus and a cross-section.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class ConfigurationError(ValueError):
    pass


@dataclass
class TrussGeometry:
    nodes: np.ndarray  # (n_nodes, 2) coordinates
    bars: list  # (i, j, group)
    supports: dict  # node -> (fix_x, fix_y)
    load_nodes: list  # nodes receiving P1..P6 (downward)
    output_node: int  # node whose vertical displacement is reported

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.bars = [(int(i), int(j), str(g)) for i, j, g in self.bars]
        self.supports = {int(k): tuple(bool(v) for v in fix) for k, fix in self.supports.items()}

    @classmethod
    def from_json(cls, text: str) -> "TrussGeometry":
        d = json.loads(text)
        return cls(d["nodes"], d["bars"], d["supports"], d["load_nodes"], d.get("output_node", 0))

    def to_json(self) -> str:
        return json.dumps({
            "nodes": self.nodes.tolist(),
            "bars": [list(b) for b in self.bars],
            "supports": {str(k): list(v) for k, v in self.supports.items()},
            "load_nodes": list(self.load_nodes),
            "output_node": self.output_node,
        })

    def mirrored_loads_symmetric(self, tol=1e-12) -> bool:
        """True if load node i and load node n-1-i mirror about the output node."""
        xm = self.nodes[self.output_node, 0]
        xs = self.nodes[self.load_nodes, 0]
        return bool(np.allclose(xs - xm, -(xs[::-1] - xm), atol=tol))


def default_geometry() -> TrussGeometry:
    bottom = [(4.0 * i, 0.0) for i in range(7)]
    top = [(2.0 + 4.0 * i, 2.0) for i in range(6)]
    bars = [(i, i + 1, "h") for i in range(6)]
    bars += [(7 + i, 8 + i, "h") for i in range(5)]
    for i in range(6):
        bars += [(i, 7 + i, "o"), (7 + i, i + 1, "o")]
    return TrussGeometry(bottom + top, bars, {0: (True, True), 6: (False, True)}, list(range(7, 13)), 3)


def _unit_stiffness(geometry: TrussGeometry):
    """Per-bar global stiffness matrices for EA = 1, shape (B, 2n, 2n), and lengths."""
    n = len(geometry.nodes)
    B = len(geometry.bars)
    K = np.zeros((B, 2 * n, 2 * n))
    lengths = np.empty(B)
    for b, (i, j, _) in enumerate(geometry.bars):
        d = geometry.nodes[j] - geometry.nodes[i]
        L = float(np.hypot(*d))
        if L == 0:
            raise ConfigurationError(f"bar {b} has zero length")
        c, s = d / L
        t = np.array([-c, -s, c, s])
        dofs = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
        K[b][np.ix_(dofs, dofs)] = np.outer(t, t) / L
        lengths[b] = L
    return K, lengths


def solve_truss(geometry: TrussGeometry, EA, forces):
    """Nodal displacements for a batch of stiffness/load cases.

    Parameters
    ----------
    EA : (S, B) array
        Axial stiffness of every bar for every case.
    forces : (S, 2 * n_nodes) array
        Nodal force vectors (x, y per node).

    Returns
    -------
    (S, 2 * n_nodes) displacements, zero on constrained dofs.
    """
    EA = np.atleast_2d(np.asarray(EA, dtype=float))
    forces = np.atleast_2d(np.asarray(forces, dtype=float))
    Kb, _ = _unit_stiffness(geometry)
    ndof = Kb.shape[1]
    fixed = set()
    for node, (fx, fy) in geometry.supports.items():
        if fx:
            fixed.add(2 * node)
        if fy:
            fixed.add(2 * node + 1)
    free = np.array([d for d in range(ndof) if d not in fixed])
    Kf = Kb[:, free][:, :, free]
    # a mechanism shows up as a singular reduced stiffness for unit EA
    K1 = Kf.sum(axis=0)
    if free.size == 0 or not np.linalg.cond(K1 / np.abs(K1).max()) < 1e12:
        raise ConfigurationError("truss stiffness is singular (mechanism or missing supports)")
    if np.any(EA <= 0):
        raise ValueError("axial stiffness must be positive")
    K = np.einsum("sb,bij->sij", EA, Kf)
    u = np.zeros((len(EA), ndof))
    u[:, free] = np.linalg.solve(K, forces[:, free][..., None])[..., 0]
    return u


def truss_deflection(X, geometry: TrussGeometry | None = None):
    """Vertical displacement of the output node (negative is downward).

    ``X`` rows are ``(E_h, E_o, A_h, A_o, P1, ..., P6)``; loads act downward
    at ``geometry.load_nodes``.
    """
    geo = geometry or default_geometry()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != 4 + len(geo.load_nodes):
        raise ValueError(f"expected {4 + len(geo.load_nodes)} columns")
    if np.any(X[:, :4] <= 0):
        raise ValueError("moduli and areas must be positive")
    horiz = np.array([g == "h" for _, _, g in geo.bars])
    EA = np.where(horiz, (X[:, 0] * X[:, 2])[:, None], (X[:, 1] * X[:, 3])[:, None])
    forces = np.zeros((len(X), 2 * len(geo.nodes)))
    for i, node in enumerate(geo.load_nodes):
        forces[:, 2 * node + 1] = -X[:, 4 + i]
    u = solve_truss(geo, EA, forces)
    return u[:, 2 * geo.output_node + 1]
