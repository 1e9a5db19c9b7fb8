"""Finite-state continuous-time Markov chains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .distributions import SpecError
from .rng import PathStreams, Source

ROW_TOL = 1e-12


@dataclass(frozen=True)
class ChainTrajectory:
    epochs: np.ndarray  # jump times T_n in (0, T]
    states: np.ndarray  # states[0] = J_0, states[n] = J_{T_n}
    horizon: float


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Generator ``Q`` (rates per unit time) and initial law of the chain.

    ``initial`` is either a state index or a probability vector.  A single
    state with ``Q = [[0]]`` is the only chain allowed a zero diagonal.
    """

    generator: np.ndarray
    initial: int | np.ndarray = 0

    def __post_init__(self):
        q = np.array(self.generator, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
            raise SpecError("generator must be a non-empty square matrix", "generator")
        q.setflags(write=False)
        object.__setattr__(self, "generator", q)
        m = q.shape[0]
        if not np.all(np.isfinite(q)):
            raise SpecError("generator entries must be finite", "generator")
        for i in range(m):
            if abs(q[i].sum()) > ROW_TOL:
                raise SpecError(f"row {i} sums to {q[i].sum():.3g}, not 0", f"generator[{i}]")
        if m == 1:
            if q[0, 0] != 0:
                raise SpecError("single-state generator must be [[0]]", "generator")
        else:
            off = q[~np.eye(m, dtype=bool)]
            if np.any(off < 0):
                i, j = np.argwhere((q < 0) & ~np.eye(m, dtype=bool))[0]
                raise SpecError(f"off-diagonal entry ({i},{j}) is negative", f"generator[{i}][{j}]")
            for i in range(m):
                if not q[i, i] < 0:
                    raise SpecError(f"state {i} is absorbing (diagonal must be < 0)",
                                    f"generator[{i}][{i}]")
            if not _strongly_connected(q > 0):
                raise SpecError("chain is not irreducible (graph of positive rates "
                                "is not strongly connected)", "generator")
        init = self.initial
        if isinstance(init, (int, np.integer)):
            if not 0 <= int(init) < m:
                raise SpecError(f"initial state {init} out of range", "initial")
            object.__setattr__(self, "initial", int(init))
        else:
            p = np.array(init, dtype=float)
            if p.shape != (m,) or np.any(p < 0) or abs(p.sum() - 1) > ROW_TOL:
                raise SpecError("initial law must be a probability vector summing to 1",
                                "initial")
            p.setflags(write=False)
            object.__setattr__(self, "initial", p)

    @property
    def num_states(self) -> int:
        return self.generator.shape[0]

    @property
    def initial_law(self) -> np.ndarray:
        if isinstance(self.initial, int):
            p = np.zeros(self.num_states)
            p[self.initial] = 1.0
            return p
        return np.asarray(self.initial)

    def with_initial(self, initial: int | np.ndarray) -> "ChainSpec":
        return ChainSpec(self.generator, initial)

    def exit_rate(self, j: int) -> float:
        return -float(self.generator[j, j])

    def jump_probs(self, j: int) -> np.ndarray:
        """Embedded jump-chain row: q_jk / (-q_jj), zero on the diagonal."""
        row = self.generator[j].copy()
        row[j] = 0.0
        r = -self.generator[j, j]
        return row / r if r > 0 else row

    def __eq__(self, other):
        return (isinstance(other, ChainSpec) and np.array_equal(self.generator, other.generator)
                and np.array_equal(self.initial_law, other.initial_law))

    def to_json(self) -> dict[str, Any]:
        init = self.initial if isinstance(self.initial, int) else self.initial_law.tolist()
        return {"generator": self.generator.tolist(), "initial": init}

    @staticmethod
    def from_json(obj: Any, path: str = "chain") -> "ChainSpec":
        if not isinstance(obj, dict) or "generator" not in obj:
            raise SpecError("expected an object with a generator", path)
        try:
            init = obj.get("initial", 0)
            if isinstance(init, bool):
                raise SpecError("initial must be an index or a vector", "initial")
            return ChainSpec(np.array(obj["generator"], dtype=float), init)
        except SpecError as e:
            raise SpecError(str(e.args[0]).split(": ", 1)[-1], f"{path}.{e.path}") from None
        except (TypeError, ValueError) as e:
            raise SpecError(f"bad generator: {e}", f"{path}.generator") from None


def _strongly_connected(adj: np.ndarray) -> bool:
    m = adj.shape[0]

    def reach(a):
        seen = np.zeros(m, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            i = stack.pop()
            for k in np.flatnonzero(a[i] & ~seen):
                seen[k] = True
                stack.append(int(k))
        return seen.all()

    return reach(adj) and reach(adj.T)


def stationary_law(chain: ChainSpec) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 by dense LU on the augmented system."""
    q = chain.generator
    m = q.shape[0]
    if m == 1:
        return np.ones(1)
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    lu, piv = lu_factor(a, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < 1e-12 * max(1.0, np.abs(q).max()):
        raise SpecError("stationary system is singular; chain is not ergodic", "generator")
    pi = lu_solve((lu, piv), b)
    if np.any(pi <= 0) or np.abs(pi @ q).max() > 1e-9 * max(1.0, np.abs(q).max()):
        raise SpecError("stationary system is ill-conditioned; chain is not ergodic",
                        "generator")
    return pi


def draw_initial(chain: ChainSpec, streams: PathStreams, rows: np.ndarray | None = None) -> np.ndarray:
    """Draw J_0 for every path (always consumes one INITIAL uniform)."""
    u = streams.uniform(Source.INITIAL, rows)[:, 0]
    if isinstance(chain.initial, int):
        return np.full(len(u), chain.initial, dtype=np.int64)
    cdf = np.cumsum(chain.initial_law)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def next_states(chain: ChainSpec, j: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Sample k != j with probability q_jk / (-q_jj) from uniforms ``u``."""
    m = chain.num_states
    probs = np.array([chain.jump_probs(i) for i in range(m)])
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    return (u[:, None] >= cdf[j]).sum(axis=1).clip(0, m - 1).astype(np.int64)


def simulate_chain(chain: ChainSpec, horizon: float, seed: int, path: int = 0) -> ChainTrajectory:
    if not horizon > 0:
        raise SpecError("horizon must be > 0", "T")
    s = PathStreams(seed, np.array([path]))
    j = int(draw_initial(chain, s)[0])
    t = 0.0
    epochs, states = [], [j]
    rate = chain.exit_rate(j)
    while rate > 0:
        t += s.exponential(Source.HOLD)[0] / rate
        if t > horizon:
            break
        j = int(next_states(chain, np.array([j]), s.uniform(Source.NEXT)[:, 0])[0])
        epochs.append(t)
        states.append(j)
        rate = chain.exit_rate(j)
    return ChainTrajectory(np.array(epochs), np.array(states, dtype=np.int64), horizon)
