"""Event-driven simulation of Markov additive processes.

Paths are simulated in vectorized batches.  Chain transitions and
compound-Poisson epochs come from exact exponential clocks and become grid
points; between events the grid is refined by a uniform micro-step ``h``
that restarts after every event.  Consumers see the simulation as a stream
of :class:`Step` records, which lets functionals (exponential integrals,
ruin times, excursions) be accumulated without storing paths.
"""

from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from .chain import draw_initial, next_states
from .distributions import SpecError
from .mapspec import MapSpec
from .rng import PathStreams, Source

NONE, LEVY, CHAIN = 0, 1, 2
MARK_NAMES = {NONE: "none", LEVY: "levy_jump", CHAIN: "chain_jump"}
DEFAULT_CHUNK = 2048


@dataclass
class Step:
    """One grid step ``(t0, t1]`` for the paths in ``rows``.

    ``state`` is J on [t0, t1), ``dcont`` the drift+Brownian increment over
    the step, ``jump`` the jump at t1 (zero unless ``mark`` != 0) and
    ``new_state`` is J_{t1}.
    """

    rows: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    state: np.ndarray
    dcont: np.ndarray
    jump: np.ndarray
    mark: np.ndarray
    new_state: np.ndarray
    source: np.ndarray  # index of the Lévy source that fired (-1 otherwise)


class Observer(Protocol):
    def start(self, rows: np.ndarray, states: np.ndarray) -> None: ...

    def step(self, s: Step) -> np.ndarray | None: ...


class _Tables:
    def __init__(self, spec: MapSpec):
        self.spec = spec
        m, d = spec.num_states, spec.dim
        self.m, self.d = m, d
        self.drift = np.array([c.drift for c in spec.per_state])
        self.loading = np.array([c.loading for c in spec.per_state])
        self.exit = np.array([spec.chain.exit_rate(j) for j in range(m)])
        kmax = max([len(c.jumps) for c in spec.per_state] + [1])
        self.rates = np.zeros((m, kmax))
        for j, c in enumerate(spec.per_state):
            for k, s in enumerate(c.jumps):
                self.rates[j, k] = s.rate
        self.lam = self.rates.sum(axis=1)
        cum = np.cumsum(self.rates, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.pick_cdf = np.where(self.lam[:, None] > 0, cum / self.lam[:, None], 1.0)
        self.pick_cdf[:, -1] = 1.0
        self.brownian = spec.has_brownian()
        self.n_unif = spec.max_uniforms()


def _clock(rate: np.ndarray, e: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(rate > 0, e / np.where(rate > 0, rate, 1.0), np.inf)


def run_batch(
    spec: MapSpec,
    path_ids: np.ndarray,
    seed: int,
    horizon: float,
    h: float,
    observer: Observer,
    micro: str = "always",
    initial_states: np.ndarray | None = None,
    first_hold: np.ndarray | None = None,
) -> None:
    """Drive ``observer`` over a batch of paths.

    ``micro="always"`` uses the micro-step in every state; ``"brownian"``
    only in states with a Brownian part (observers then integrate drift-only
    segments exactly).  ``first_hold`` overrides the first holding time
    (0 forces an immediate transition, used to sample excursions).
    """
    if not h > 0:
        raise SpecError("micro step h must be > 0", "h")
    if not horizon > 0:
        raise SpecError("horizon must be > 0", "T")
    tb = _Tables(spec)
    chain = spec.chain
    d = tb.d
    streams = PathStreams(seed, path_ids)
    n = len(streams)
    J = draw_initial(chain, streams)
    if initial_states is not None:
        J = np.asarray(initial_states, dtype=np.int64).copy()
    t = np.zeros(n)
    hold = streams.exponential(Source.HOLD)
    next_chain = _clock(tb.exit[J], hold)
    if first_hold is not None:
        next_chain = np.where(tb.exit[J] > 0, np.asarray(first_hold, dtype=float), np.inf)
    next_levy = _clock(tb.lam[J], streams.exponential(Source.LEVY_CLOCK))
    rows = np.arange(n)
    use_micro = tb.brownian if micro == "brownian" else np.ones(tb.m, dtype=bool)
    observer.start(rows.copy(), J.copy())
    T = float(horizon)

    while rows.size:
        tev = np.minimum(np.minimum(next_chain, next_levy), T)
        step_h = np.where(use_micro[J], h, np.inf)
        t1 = np.minimum(t + step_h, tev)
        is_levy = (t1 == next_levy) & (next_levy <= next_chain)
        is_chain = (t1 == next_chain) & ~is_levy
        dt = t1 - t
        z = streams.normal(Source.BROWNIAN, None, d)
        sq = np.sqrt(dt)
        load = tb.loading[J]
        noise = load[:, :, 0] * z[:, :1]
        for b in range(1, d):
            noise = noise + load[:, :, b] * z[:, b:b + 1]
        dcont = tb.drift[J] * dt[:, None] + noise * sq[:, None]
        jump = np.zeros((len(rows), d))
        mark = np.zeros(len(rows), dtype=np.int8)
        src = np.full(len(rows), -1, dtype=np.int64)
        newJ = J.copy()

        li = np.flatnonzero(is_levy)
        if li.size:
            mark[li] = LEVY
            u = streams.uniform(Source.LEVY_PICK, li)[:, 0]
            k = (u[:, None] >= tb.pick_cdf[J[li]]).sum(axis=1)
            k = np.minimum(k, tb.rates.shape[1] - 1)
            src[li] = k
            us = streams.uniform(Source.LEVY_SIZE, li, tb.n_unif)
            for j in np.unique(J[li]):
                for kk, s in enumerate(spec.per_state[j].jumps):
                    sel = (J[li] == j) & (k == kk)
                    if sel.any():
                        jump[li[sel]] = s.law.sample(us[sel])
            next_levy[li] = t1[li] + _clock(tb.lam[J[li]], streams.exponential(Source.LEVY_CLOCK, li))

        ci = np.flatnonzero(is_chain)
        if ci.size:
            mark[ci] = CHAIN
            u = streams.uniform(Source.NEXT, ci)[:, 0]
            nj = next_states(chain, J[ci], u)
            us = streams.uniform(Source.SHOCK, ci, tb.n_unif)
            for (a, b), law in spec.transition_jumps.laws.items():
                sel = (J[ci] == a) & (nj == b)
                if sel.any():
                    jump[ci[sel]] = law.sample(us[sel])
            newJ[ci] = nj
            next_chain[ci] = t1[ci] + _clock(tb.exit[nj], streams.exponential(Source.HOLD, ci))
            next_levy[ci] = t1[ci] + _clock(tb.lam[nj], streams.exponential(Source.LEVY_CLOCK, ci))

        stop = observer.step(Step(rows, t, t1, J, dcont, jump, mark, newJ, src))
        t = t1
        J = newJ
        done = t >= T
        if stop is not None:
            done |= stop
        if done.any():
            keep = ~done
            rows, t, J = rows[keep], t[keep], J[keep]
            next_chain, next_levy = next_chain[keep], next_levy[keep]
            streams.subset(keep)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("THREADS", "1") or 1)
    return max(1, int(threads))


def map_chunks(fn: Callable[[np.ndarray], Any], n: int, threads: int | None = None,
               chunk: int = DEFAULT_CHUNK, offset: int = 0) -> list[Any]:
    """Run ``fn(path_ids)`` over fixed-size chunks of path indices, in order.

    Chunk boundaries do not depend on the thread count, and every path has
    its own random stream, so results are identical for any ``threads``.
    """
    ids = [np.arange(a, min(a + chunk, n)) + offset for a in range(0, n, chunk)]
    threads = resolve_threads(threads)
    if threads == 1 or len(ids) == 1:
        return [fn(c) for c in ids]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, ids))


# ---------------------------------------------------------------- SamplePath

@dataclass(frozen=True, eq=False)
class SamplePath:
    """One càdlàg trajectory on an event-anchored grid.

    ``values[k]`` is X at ``times[k]``, ``jumps[k]`` the jump at that grid
    point (so the left limit is ``values[k] - jumps[k]``), ``states[k]`` the
    chain state on [t_k, t_{k+1}).  ``cov[j]`` is the instantaneous
    covariance of the continuous martingale part in state j, used for
    analytic quadratic variations.
    """

    times: np.ndarray
    states: np.ndarray
    values: np.ndarray
    jumps: np.ndarray
    marks: np.ndarray
    cov: np.ndarray
    kind: str = "additive"
    names: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        jmp = np.asarray(self.jumps, dtype=float).reshape(v.shape)
        cov = np.asarray(self.cov, dtype=float)
        d = v.shape[1]
        if cov.ndim == 1:
            cov = cov[:, None, None]
        if cov.shape[1:] != (d, d):
            raise SpecError(f"cov metadata shape {cov.shape} does not match dimension {d}", "cov")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "jumps", jmp)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "states", np.asarray(self.states, dtype=np.int64))
        object.__setattr__(self, "marks", np.asarray(self.marks, dtype=np.int8))
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{i + 1}" for i in range(d)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def left(self) -> np.ndarray:
        return self.values - self.jumps

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    def x(self, i: int = 0) -> np.ndarray:
        return self.values[:, i]

    def continuous_increments(self) -> np.ndarray:
        """Increments of the continuous part over each step, shape (K, d)."""
        return self.left[1:] - self.values[:-1]

    def step_states(self) -> np.ndarray:
        """State during each step (t_k, t_{k+1}]."""
        return self.states[:-1]

    def qv_increments(self, i: int = 0, k: int | None = None) -> np.ndarray:
        """Analytic continuous covariation increments sigma_{ik}(J) dt per step."""
        k = i if k is None else k
        return self.cov[self.step_states(), i, k] * self.dt

    def component(self, i: int) -> "SamplePath":
        return SamplePath(self.times, self.states, self.values[:, [i]], self.jumps[:, [i]],
                          self.marks, self.cov[:, [i]][:, :, [i]], self.kind,
                          (self.names[i],), dict(self.meta))

    def with_values(self, values, jumps, cov=None, kind=None, names=(), meta=None) -> "SamplePath":
        return SamplePath(self.times, self.states, values, jumps, self.marks,
                          self.cov if cov is None else cov, kind or self.kind, names,
                          dict(self.meta) if meta is None else meta)

    def coarsen(self, factor: int) -> "SamplePath":
        """Keep event points, the end point, and every ``factor``-th micro point
        counted from the last event."""
        if factor == 1:
            return self
        keep = np.zeros(len(self.times), dtype=bool)
        keep[0] = keep[-1] = True
        c = 0
        for k in range(1, len(self.times)):
            if self.marks[k] != NONE:
                keep[k] = True
                c = 0
            else:
                c += 1
                if c % factor == 0:
                    keep[k] = True
        idx = np.flatnonzero(keep)
        return SamplePath(self.times[idx], self.states[idx], self.values[idx], self.jumps[idx],
                          self.marks[idx], self.cov, self.kind, self.names, dict(self.meta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        d = self.dim
        head = ["time", "state"] + [f"x{i + 1}" for i in range(d)] + ["mark"] + \
            [f"jump{i + 1}" for i in range(d)]
        buf.write(",".join(head) + "\n")
        for k in range(len(self.times)):
            row = [repr(float(self.times[k])), str(int(self.states[k]))]
            row += [repr(float(v)) for v in self.values[k]]
            row.append(MARK_NAMES[int(self.marks[k])])
            row += [repr(float(v)) for v in self.jumps[k]]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def check(self) -> None:
        """Assert the structural invariants of a simulated path."""
        if not np.all(np.diff(self.times) > 0):
            raise AssertionError("times not strictly increasing")
        if self.kind == "additive" and np.any(self.values[0] != 0):
            raise AssertionError("X_0 != 0")
        change = np.flatnonzero(np.diff(self.states) != 0) + 1
        chain_marks = np.flatnonzero(self.marks == CHAIN)
        if not np.array_equal(change, chain_marks):
            raise AssertionError("state changes do not coincide with chain marks")


def stack(*paths: SamplePath, cross: dict[tuple[int, int], np.ndarray] | None = None) -> SamplePath:
    """Stack univariate paths sharing a grid; ``cross`` gives per-state sigma_{ik}."""
    base = paths[0]
    for p in paths[1:]:
        if len(p.times) != len(base.times) or np.any(p.times != base.times) or \
                np.any(p.states != base.states):
            raise SpecError("paths do not share a grid and chain trajectory", "paths")
    vals = np.column_stack([p.values[:, 0] for p in paths])
    jmp = np.column_stack([p.jumps[:, 0] for p in paths])
    m = base.cov.shape[0]
    d = len(paths)
    cov = np.zeros((m, d, d))
    for i, p in enumerate(paths):
        cov[:, i, i] = p.cov[:, 0, 0]
    for (i, k), c in (cross or {}).items():
        cov[:, i, k] = cov[:, k, i] = c
    return SamplePath(base.times, base.states, vals, jmp, base.marks, cov,
                      base.kind, tuple(p.names[0] for p in paths))


class _Recorder:
    def __init__(self, d: int):
        self.d = d
        self.chunks: list[tuple] = []

    def start(self, rows, states):
        self.n = len(rows)
        self.j0 = states

    def step(self, s: Step):
        self.chunks.append((s.rows.copy(), s.t1.copy(), s.new_state.copy(),
                            s.dcont.copy(), s.jump.copy(), s.mark.copy()))
        return None

    def paths(self, spec: MapSpec, h: float, names=()) -> list[SamplePath]:
        rows = np.concatenate([c[0] for c in self.chunks])
        order = np.argsort(rows, kind="stable")
        rows = rows[order]
        t1 = np.concatenate([c[1] for c in self.chunks])[order]
        st = np.concatenate([c[2] for c in self.chunks])[order]
        dc = np.concatenate([c[3] for c in self.chunks])[order]
        jp = np.concatenate([c[4] for c in self.chunks])[order]
        mk = np.concatenate([c[5] for c in self.chunks])[order]
        bounds = np.searchsorted(rows, np.arange(self.n + 1))
        cov = np.array([c.cov for c in spec.per_state])
        out = []
        for r in range(self.n):
            a, b = bounds[r], bounds[r + 1]
            times = np.concatenate([[0.0], t1[a:b]])
            states = np.concatenate([[self.j0[r]], st[a:b]])
            inc = dc[a:b] + jp[a:b]
            values = np.vstack([np.zeros((1, self.d)), np.cumsum(inc, axis=0)])
            jumps = np.vstack([np.zeros((1, self.d)), jp[a:b]])
            marks = np.concatenate([[NONE], mk[a:b]])
            out.append(SamplePath(times, states, values, jumps, marks, cov, "additive", names,
                                  {"h": h}))
        return out


def simulate_map_paths(spec: MapSpec, n: int, horizon: float, h: float, seed: int,
                       threads: int | None = None, names: Sequence[str] = (),
                       initial_states: np.ndarray | None = None, offset: int = 0) -> list[SamplePath]:
    if n < 1:
        raise SpecError("need at least one path", "N")

    def work(ids):
        rec = _Recorder(spec.dim)
        init = None if initial_states is None else np.asarray(initial_states)[ids - offset]
        run_batch(spec, ids, seed, horizon, h, rec, initial_states=init)
        return rec.paths(spec, h, tuple(names))

    out: list[SamplePath] = []
    for part in map_chunks(work, n, threads, chunk=256, offset=offset):
        out.extend(part)
    return out


def simulate_map_path(spec: MapSpec, horizon: float, h: float, seed: int, path: int = 0,
                      names: Sequence[str] = ()) -> SamplePath:
    return simulate_map_paths(spec, 1, horizon, h, seed, threads=1, names=names, offset=path)[0]


class _Terminal:
    """Collect X_T and J_T per path."""

    def __init__(self, n: int, d: int):
        self.x = np.zeros((n, d))
        self.j = np.zeros(n, dtype=np.int64)

    def start(self, rows, states):
        self.j[rows] = states

    def step(self, s: Step):
        self.x[s.rows] += s.dcont + s.jump
        self.j[s.rows] = s.new_state
        return None


def terminal_values(spec: MapSpec, n: int, horizon: float, h: float, seed: int,
                    threads: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(X_T, J_T) for ``n`` paths without storing trajectories."""
    def work(ids):
        obs = _Terminal(len(ids), spec.dim)
        run_batch(spec, ids, seed, horizon, h, obs, micro="brownian")
        return obs.x, obs.j

    parts = map_chunks(work, n, threads)
    return np.vstack([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
