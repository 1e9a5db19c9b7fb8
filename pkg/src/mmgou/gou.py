"""Markov-modulated generalized Ornstein-Uhlenbeck paths and (A, B) functionals."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .distributions import SpecError
from .mapspec import MapSpec
from .paths import SamplePath, simulate_map_paths
from .rng import PathStreams, Source
from .stochcalc import (CovariationSpec, DomainError, _grid_index, eta_from_L, stochastic_exponential,
                        weighted_integral, xi_from_U)


@dataclass(frozen=True, eq=False)
class MmgouPath:
    base: SamplePath
    v0: float
    v: np.ndarray
    coords: str = "xi_eta"

    @property
    def times(self) -> np.ndarray:
        return self.base.times

    @property
    def states(self) -> np.ndarray:
        return self.base.states

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time,state,v\n")
        for t, j, v in zip(self.times, self.states, self.v):
            buf.write(f"{float(t)!r},{int(j)},{float(v)!r}\n")
        return buf.getvalue()


def _bivariate(p: SamplePath) -> None:
    if p.dim != 2:
        raise SpecError("a bivariate path is required", "path")


def mmgou_explicit(xieta: SamplePath, v0: float, scheme: str = "ito_taylor") -> MmgouPath:
    """V_t = e^{-xi_t} (V_0 + int e^{xi_-} d eta)."""
    _bivariate(xieta)
    xi, eta = xieta.component(0), xieta.component(1)
    integral = weighted_integral(xi, eta, xieta.cov[:, 0, 1], scheme)
    v = np.exp(-xi.values[:, 0]) * (float(v0) + integral)
    return MmgouPath(xieta, float(v0), v, "xi_eta")


def mmgou_sde(UL: SamplePath, v0: float, scheme: str = "euler") -> MmgouPath:
    """Solve dV = V_- dU + dL on the grid; jump increments are applied exactly.

    ``"euler"``: V += V dU_c + dL_c.  ``"milstein"`` adds the first-order
    Itô-Taylor terms V (dU_c^2 - sigma_U^2 dt)/2 + (dU_c dL_c - sigma_{UL} dt)/2.
    """
    _bivariate(UL)
    if np.any(UL.jumps[:, 0] == -1):
        raise DomainError("MMGOU needs jumps dU != -1")
    dc = UL.continuous_increments()
    du, dl = dc[:, 0], dc[:, 1]
    j = UL.step_states()
    dt = UL.dt
    s_uu = UL.cov[j, 0, 0] * dt
    s_ul = UL.cov[j, 0, 1] * dt
    ju, jl = UL.jumps[1:, 0], UL.jumps[1:, 1]
    if scheme == "euler":
        a = 1.0 + du
        b = dl
    elif scheme == "milstein":
        a = 1.0 + du + 0.5 * (du * du - s_uu)
        b = dl + 0.5 * (du * dl - s_ul)
    else:
        raise SpecError(f"unknown scheme {scheme!r}", "scheme")
    v = np.empty(len(UL.times))
    v[0] = float(v0)
    for k in range(len(dt)):
        vl = v[k] * a[k] + b[k]
        v[k + 1] = vl * (1.0 + ju[k]) + jl[k]
    return MmgouPath(UL, float(v0), v, "U_L")


def AB_functionals(path: SamplePath, s: float | np.ndarray, t: float | np.ndarray,
                   coords: str = "xi_eta", scheme: str = "ito_taylor",
                   cov: CovariationSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(A_{s,t}, B_{s,t}) for grid times s <= t (scalars or arrays).

    ``coords="xi_eta"``: A = e^{-(xi_t - xi_s)}, B = e^{-xi_t} int_(s,t] e^{xi_-} d eta.
    ``coords="U_eta"``:  A = E(U)_t / E(U)_s, B = E(U)_t int_(s,t] E(U)_-^{-1} d eta.
    """
    _bivariate(path)
    ks = np.atleast_1d([_grid_index(path, float(x)) for x in np.atleast_1d(s)])
    kt = np.atleast_1d([_grid_index(path, float(x)) for x in np.atleast_1d(t)])
    return AB_at(path, ks, kt, coords, scheme)


def AB_at(path: SamplePath, ks: np.ndarray, kt: np.ndarray, coords: str = "xi_eta",
          scheme: str = "ito_taylor") -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (A, B) at grid indices ``ks <= kt``."""
    ks, kt = np.asarray(ks), np.asarray(kt)
    if np.any(ks > kt):
        raise SpecError("need s <= t", "s")
    if coords == "xi_eta":
        xi = path.component(0)
        loga = -xi.values[:, 0]
        integral = weighted_integral(xi, path.component(1), path.cov[:, 0, 1], scheme)
        a = np.exp(loga[kt] - loga[ks])
        b = np.exp(loga[kt]) * (integral[kt] - integral[ks])
        return a, b
    if coords == "U_eta":
        z = stochastic_exponential(path.component(0)).values[:, 0]
        if np.any(z == 0):
            raise DomainError("E(U) hits 0")
        # int E(U)_-^{-1} d eta = int e^{g_-} d eta with g = -log E(U); needs dU > -1
        if np.any(z < 0):
            raise DomainError("U_eta coordinates need dU > -1")
        u = path.component(0)
        g = xi_from_U(u)
        integral = weighted_integral(g, path.component(1), -path.cov[:, 0, 1], scheme)
        a = z[kt] / z[ks]
        b = z[kt] * (integral[kt] - integral[ks])
        return a, b
    raise SpecError(f"unknown coords {coords!r}", "coords")


def B_via_U_eta(U: SamplePath, eta: SamplePath, cov: CovariationSpec) -> np.ndarray:
    """B_t = E(U)_t int E(U)_-^{-1} d eta for univariate U, eta."""
    g = xi_from_U(U)
    integral = weighted_integral(g, eta, -np.asarray(cov.per_state_cov))
    return stochastic_exponential(U).values[:, 0] * integral


# V0 sampler: (J_0 per path, one uniform per path) -> V_0 per path
V0Sampler = Callable[[np.ndarray, np.ndarray], np.ndarray]


def draw_v0(v0: Union[float, V0Sampler], seed: int, path_ids: np.ndarray, j0: np.ndarray) -> np.ndarray:
    """V_0 per path: a constant, or a sampler fed only J_0 and the path's own V0 stream,
    so V_0 is conditionally independent of the driving path given J_0."""
    path_ids = np.asarray(path_ids)
    if not callable(v0):
        return np.full(len(path_ids), float(v0))
    u = PathStreams(seed, path_ids).uniform(Source.V0)[:, 0]
    out = np.asarray(v0(np.asarray(j0), u), dtype=float)
    if out.shape != (len(path_ids),):
        raise SpecError("V0 sampler must return one value per path", "v0")
    return out


def simulate_mmgou(spec: MapSpec, n: int, T: float, h: float, seed: int, v0: Union[float, V0Sampler] = 0.0,
                   coords: str = "xi_eta", threads: int | None = None) -> list[MmgouPath]:
    """``n`` MMGOU paths from a (xi, eta) spec (explicit formula) or a (U, L) spec (Milstein SDE)."""
    if spec.dim != 2:
        raise SpecError("a bivariate MAP is required", "model")
    if coords not in ("xi_eta", "UL"):
        raise SpecError(f"unknown coords {coords!r}", "coords")
    paths = simulate_map_paths(spec, n, T, h, seed, threads)
    v = draw_v0(v0, seed, np.arange(n), np.array([p.states[0] for p in paths]))
    if coords == "xi_eta":
        return [mmgou_explicit(p, x) for p, x in zip(paths, v)]
    return [mmgou_sde(p, x, scheme="milstein") for p, x in zip(paths, v)]


__all__ = ["MmgouPath", "mmgou_explicit", "mmgou_sde", "AB_functionals", "AB_at", "B_via_U_eta",
           "eta_from_L", "draw_v0", "simulate_mmgou"]
