"""Sojourns, excursions and the conflated process of a MAP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import SpecError
from .mapspec import MapSpec, map_linear
from .montecarlo import MonteCarloEstimate, mean_estimate
from .paths import CHAIN, NONE, SamplePath, Step, map_chunks, run_batch

MIN_EXCURSIONS = 100


@dataclass(frozen=True)
class SojournDecomposition:
    state: int
    returns: np.ndarray  # tau^re_n, with tau^re_0 = 0 when the path starts in the state
    exits: np.ndarray  # tau^ex_n
    intervals: list[tuple[float, float]]  # [start, end); the last may be cut at the horizon
    censored: bool  # last interval cut at the horizon

    @property
    def lengths(self) -> np.ndarray:
        """Lengths of the completed sojourns."""
        n = len(self.intervals) - (1 if self.censored else 0)
        return np.array([b - a for a, b in self.intervals[:n]])


def _entries_exits(path: SamplePath, j: int) -> tuple[np.ndarray, np.ndarray]:
    st = path.states
    k = np.flatnonzero(path.marks == CHAIN)
    k = k[k > 0]
    entries = k[(st[k] == j) & (st[k - 1] != j)]
    exits = k[(st[k] != j) & (st[k - 1] == j)]
    return entries, exits


def sojourn_decomposition(path: SamplePath, j: int) -> SojournDecomposition:
    if not 0 <= j < path.cov.shape[0]:
        raise SpecError(f"state {j} out of range", "j")
    entries, exits = _entries_exits(path, j)
    t = path.times
    starts = list(t[entries])
    if path.states[0] == j:
        starts = [0.0] + starts
    ends = list(t[exits])
    censored = len(starts) > len(ends)
    if censored:
        ends.append(float(t[-1]))
    return SojournDecomposition(j, np.array(starts), t[exits], list(zip(starts, ends)), censored)


def conflate_path(path: SamplePath, j: int) -> SamplePath:
    """Watch X only while J = j; each excursion becomes one jump X_{re} - X_{ex-}."""
    if path.dim != 1:
        raise SpecError("conflation needs a one-dimensional component", "path")
    if path.states[0] != j:
        raise SpecError(f"path does not start in state {j}", "path")
    entries, exits = _entries_exits(path, j)
    t, v, jp, lf = path.times, path.values[:, 0], path.jumps[:, 0], path.left[:, 0]
    K = len(t) - 1
    times, vals, jumps, marks = [], [], [], []
    s0 = 0.0  # conflated time at the start of the current sojourn
    a = 0  # first grid index of the current sojourn
    first = True
    for n in range(len(exits) + 1):
        b = exits[n] if n < len(exits) else K + 1
        lo = a if first else a + 1
        body = np.arange(lo, b)
        times.extend(s0 + t[body] - t[a])
        vals.extend(v[body])
        jumps.extend(jp[body])
        marks.extend(path.marks[body])
        first = False
        if n == len(exits):
            break
        s_end = s0 + t[b] - t[a]
        nxt = entries[entries > b]
        if nxt.size:
            c = nxt[0]
            times.append(s_end)
            vals.append(v[c])
            jumps.append(v[c] - lf[b])
            marks.append(CHAIN)
            s0, a = s_end, c
        else:
            times.append(s_end)
            vals.append(lf[b])
            jumps.append(0.0)
            marks.append(NONE)
            break
    times = np.array(times)
    keep = np.concatenate([[True], np.diff(times) > 0])
    times = times[keep]
    n = len(times)
    return SamplePath(times, np.full(n, j), np.array(vals)[keep], np.array(jumps)[keep],
                      np.array(marks)[keep], path.cov, "additive", path.names,
                      dict(path.meta, conflated_state=j))


class ExcursionObserver:
    """Accumulate, per excursion from ``j``, the increment X_{re} - X_{ex-}, its
    duration, and optionally int e^{-(xi_{s-} - xi_{ex-})} dL over the excursion
    for a bivariate (xi, L) spec."""

    def __init__(self, n: int, d: int, j: int, weighted: bool = False, sigma=None):
        self.j = j
        self.inc = np.zeros((n, d))
        self.dur = np.zeros(n)
        self.weighted = weighted
        self.wint = np.zeros(n)
        self.xi = np.zeros(n)  # xi - xi_{ex-}
        self.sigma = sigma
        self.done = np.zeros(n, dtype=bool)

    def start(self, rows, states):
        pass

    def step(self, s: Step):
        r = s.rows
        if self.weighted:
            w = np.exp(-self.xi[r])
            dx, dl = s.dcont[:, 0], s.dcont[:, 1]
            # weight e^{-xi}: log-weight g = -xi, sigma_{g,L} = -sigma_{xi,L}
            sgl = -self.sigma[s.state] * (s.t1 - s.t0)
            cont = dl + 0.5 * (-dx * dl - sgl)
            xl = self.xi[r] + dx
            self.wint[r] += w * cont + np.exp(-xl) * s.jump[:, 1]
            self.xi[r] = xl + s.jump[:, 0]
        self.inc[r] += s.dcont + s.jump
        self.dur[r] += s.t1 - s.t0
        back = (s.mark == CHAIN) & (s.new_state == self.j)
        self.done[r[back]] = True
        return back


def sample_excursions(spec: MapSpec, j: int, n: int, seed: int, h: float = np.inf,
                      weighted: bool = False, threads: int | None = None,
                      max_time: float = 1e7) -> dict[str, np.ndarray]:
    """Sample ``n`` independent excursions away from ``j`` (started by an exit at t=0)."""
    if spec.chain.exit_rate(j) == 0:
        raise SpecError(f"state {j} has no excursions", "j")
    sig = np.array([c.cov[0, 1] if c.dim == 2 else 0.0 for c in spec.per_state])

    def work(ids):
        obs = ExcursionObserver(len(ids), spec.dim, j, weighted, sig)
        run_batch(spec, ids, seed, max_time, h, obs, initial_states=np.full(len(ids), j), first_hold=np.zeros(len(ids)))
        return obs

    parts = map_chunks(work, n, threads)
    out = {
        "increment": np.vstack([p.inc for p in parts]),
        "duration": np.concatenate([p.dur for p in parts]),
        "complete": np.concatenate([p.done for p in parts]),
    }
    if weighted:
        out["weighted"] = np.concatenate([p.wint for p in parts])
    return out


@dataclass(frozen=True)
class ConflatedTriplet:
    """Triplet of the conflated Lévy process in state j.

    ``gamma`` and ``sigma2`` are copied from the state-j component.  The Lévy
    measure is ``levy_rate * jump_law + exit_rate * law(excursion increment)``;
    the excursion part is returned as an empirical sample with atoms at 0
    removed (``excursion_weight`` is the surviving fraction).
    """

    state: int
    gamma: float
    sigma2: float
    drift: float
    levy_rate: float
    exit_rate: float
    excursion_sample: np.ndarray
    excursion_weight: float
    excursion_mean: MonteCarloEstimate
    component_mean: float | None

    @property
    def rate(self) -> float:
        return self.levy_rate + self.exit_rate * self.excursion_weight

    @property
    def mean(self) -> MonteCarloEstimate:
        """E[hat X^j_1] = E[X^j_1] + exit_rate * E[excursion increment]."""
        if self.component_mean is None:
            raise SpecError("component mean undefined", "jump_law")
        e = self.excursion_mean
        return MonteCarloEstimate.from_mean_se(self.component_mean + self.exit_rate * e.estimate,
                                               self.exit_rate * e.se, e.n)


def _component_spec(spec: MapSpec, component: int | None) -> MapSpec:
    if spec.dim == 1:
        return spec
    if component is None:
        raise SpecError("select a component of the bivariate MAP", "component")
    return map_linear(spec, np.eye(spec.dim)[[component]])


def conflated_triplet(spec: MapSpec, j: int, mc: int, seed: int, component: int | None = None,
                      threads: int | None = None) -> ConflatedTriplet:
    if mc < MIN_EXCURSIONS:
        raise SpecError(f"need at least {MIN_EXCURSIONS} excursions, got {mc}", "mc")
    one = _component_spec(spec, component)
    c = one.per_state[j]
    try:
        cm = float(c.mean_increment()[0])
    except SpecError:
        cm = None
    q = spec.chain.exit_rate(j)
    if q == 0:
        sample = np.zeros(0)
        est = MonteCarloEstimate.from_mean_se(0.0, 0.0, 0)
        weight = 0.0
    else:
        exc = sample_excursions(one, j, mc, seed, threads=threads)["increment"][:, 0]
        est = mean_estimate(exc)
        sample = exc[exc != 0]
        weight = len(sample) / len(exc)
    return ConflatedTriplet(j, float(c.gamma()[0]), float(c.cov[0, 0]), float(c.drift[0]),
                            c.jump_rate, q, sample, weight, est, cm)
