"""Interconnection of scalar transfer-function blocks into one global state-space.

Every block is a SISO transfer function; block inputs and diagram outputs are
linear combinations of block outputs and external inputs. The static
feedthrough coupling is eliminated once at assembly time, which certifies
well-posedness of algebraic loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lti import RationalTF, realize

__all__ = ["IllPosedLoopError", "DiagramBuilder", "AssembledSystem", "WELL_POSED_COND_LIMIT"]

WELL_POSED_COND_LIMIT = 1e12


class IllPosedLoopError(RuntimeError):
    """The static feedthrough loop is singular (or numerically indistinguishable from it)."""


def ex_sum(*exprs):
    out = {}
    for e in exprs:
        for k, c in e.items():
            out[k] = out.get(k, 0.0) + c
    return out


def ex_scale(expr, c):
    return {k: c * v for k, v in expr.items()}


@dataclass
class AssembledSystem:
    """Global realization with inputs r and stacked outputs."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    feedthrough_cond: float

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    def simulate(self, r: np.ndarray) -> np.ndarray:
        """Zero-initial-condition response to input samples r (N x n_inputs)."""
        r = np.asarray(r, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        n_steps = r.shape[0]
        x = np.zeros(self.n_states)
        y = np.empty((n_steps, self.n_outputs))
        for t in range(n_steps):
            y[t] = self.C @ x + self.D @ r[t]
            x = self.A @ x + self.B @ r[t]
        return y

    def transfer_at(self, omega: float) -> np.ndarray:
        return self.transfer_grid(np.array([omega]))[0]

    def _modal(self):
        # eigendecomposition cache for fast grid evaluation; None marks an
        # ill-conditioned eigenbasis, where the dense solve is kept
        if not hasattr(self, "_modal_cache"):
            lam, V = np.linalg.eig(self.A)
            cond = np.linalg.cond(V)
            if np.isfinite(cond) and cond < 1e6:
                self._modal_cache = (lam, self.C @ V, np.linalg.solve(V, self.B))
            else:
                self._modal_cache = None
        return self._modal_cache

    def transfer_grid(self, omegas) -> np.ndarray:
        """Frequency response C (zI - A)^{-1} B + D for each grid angle; (K, p, m)."""
        omegas = np.asarray(omegas, dtype=float)
        z = np.exp(1j * omegas)
        if self.n_states == 0:
            return np.broadcast_to(self.D, (len(z),) + self.D.shape).astype(complex)
        modal = self._modal()
        if modal is not None:
            lam, CV, VB = modal
            gains = 1.0 / (z[:, None] - lam[None, :])
            return np.einsum("pk,zk,kq->zpq", CV, gains, VB) + self.D
        eye = np.eye(self.n_states)
        lhs = z[:, None, None] * eye - self.A
        rhs = np.broadcast_to(self.B, (len(z),) + self.B.shape)
        sol = np.linalg.solve(lhs, rhs.astype(complex))
        return self.C @ sol + self.D

    def markov_parameters(self, count: int) -> np.ndarray:
        """Impulse-response matrices H_0 = D, H_k = C A^{k-1} B; (count, p, m)."""
        out = np.zeros((count, self.n_outputs, self.n_inputs))
        out[0] = self.D
        v = self.B.copy()
        for k in range(1, count):
            out[k] = self.C @ v
            v = self.A @ v
        return out

    def spectral_radius(self) -> float:
        if self.n_states == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


@dataclass
class DiagramBuilder:
    """Collects blocks, wiring expressions, and output rows, then assembles."""

    n_inputs: int
    _names: list = field(default_factory=list)
    _tfs: list = field(default_factory=list)
    _index: dict = field(default_factory=dict)
    _wiring: dict = field(default_factory=dict)
    _outputs: list = field(default_factory=list)

    def add_block(self, name: str, a: RationalTF) -> dict:
        """Register a block and return the expression for its output."""
        if name in self._index:
            raise ValueError(f"duplicate block name {name!r}")
        self._index[name] = len(self._names)
        self._names.append(name)
        self._tfs.append(a)
        return {("b", name): 1.0}

    def ext(self, k: int) -> dict:
        if not 0 <= k < self.n_inputs:
            raise IndexError(f"external input {k} out of range")
        return {("x", k): 1.0}

    def connect(self, name: str, expr: dict) -> None:
        if name not in self._index:
            raise KeyError(f"unknown block {name!r}")
        self._wiring[name] = expr

    def add_output(self, expr: dict) -> None:
        self._outputs.append(expr)

    def build(self, cond_limit: float = WELL_POSED_COND_LIMIT) -> AssembledSystem:
        n_b = len(self._names)
        realizations = [realize(a) for a in self._tfs]
        offsets = np.cumsum([0] + [ss.n_states for ss in realizations])
        n = int(offsets[-1])

        A = np.zeros((n, n))
        B_blk = np.zeros((n, n_b))
        C_blk = np.zeros((n_b, n))
        D_blk = np.zeros((n_b, n_b))
        for b, ss in enumerate(realizations):
            s = slice(offsets[b], offsets[b + 1])
            A[s, s] = ss.A
            B_blk[s, b] = ss.B[:, 0]
            C_blk[b, s] = ss.C[0, :]
            D_blk[b, b] = ss.D[0, 0]

        M = np.zeros((n_b, n_b))
        E = np.zeros((n_b, self.n_inputs))
        for name, expr in self._wiring.items():
            row = self._index[name]
            for (kind, key), coef in expr.items():
                if kind == "b":
                    M[row, self._index[key]] += coef
                else:
                    E[row, key] += coef

        Yz = np.zeros((len(self._outputs), n_b))
        Yx = np.zeros((len(self._outputs), self.n_inputs))
        for row, expr in enumerate(self._outputs):
            for (kind, key), coef in expr.items():
                if kind == "b":
                    Yz[row, self._index[key]] += coef
                else:
                    Yx[row, key] += coef

        S = np.eye(n_b) - D_blk @ M
        cond = float(np.linalg.cond(S)) if n_b else 1.0
        if not np.isfinite(cond) or cond > cond_limit:
            raise IllPosedLoopError(
                f"algebraic loop is ill posed: feedthrough condition number {cond:.3g}"
            )
        # z = G1 x + G2 r with z the stacked block outputs
        G1 = np.linalg.solve(S, C_blk) if n_b else C_blk
        G2 = np.linalg.solve(S, D_blk @ E) if n_b else D_blk @ E

        A_cl = A + B_blk @ (M @ G1)
        B_cl = B_blk @ (M @ G2 + E)
        C_cl = Yz @ G1
        D_cl = Yz @ G2 + Yx
        return AssembledSystem(A_cl, B_cl, C_cl, D_cl, cond)
