"""Physical models: fluxes, certified wave-speed bounds, entropy pairs.

Three models are provided: scalar conservation laws (any dimension), the
1D p-system in Lagrangian coordinates, and the compressible Euler
equations with a gamma-law gas.  Every ``max_wave_speed`` implementation
returns a certified upper bound on the largest signal speed of the
one-dimensional Riemann problem; the bound is what sizes the artificial
viscosity, so it must never under-estimate.

All operations are pure functions of immutable model parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

NEWTON_RTOL = 1e-10
NEWTON_MAXIT = 100
ADMISSIBLE_TOL = 1e-11


class AdmissibilityError(ValueError):
    """A state violates the admissible-set constraints of its model."""


class System:
    """Common interface: component count m, dimension d, flux, speeds."""

    m: int
    d: int

    def flux(self, U: np.ndarray) -> np.ndarray:
        """Flux matrices for a batch of states, shape (..., m, d)."""
        raise NotImplementedError

    def max_wave_speed_batch(self, n, UL, UR) -> np.ndarray:
        raise NotImplementedError

    def max_wave_speed(self, n, uL, uR) -> float:
        n = np.atleast_1d(np.asarray(n, dtype=float))
        uL = np.atleast_1d(np.asarray(uL, dtype=float))
        uR = np.atleast_1d(np.asarray(uR, dtype=float))
        return float(self.max_wave_speed_batch(n[None, :], uL[None, :], uR[None, :])[0])

    def admissible_mask(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def admissible(self, u) -> bool:
        return bool(self.admissible_mask(np.atleast_2d(np.asarray(u, dtype=float))).all())

    def check_admissible(self, U: np.ndarray) -> None:
        ok = self.admissible_mask(np.atleast_2d(U))
        if not ok.all():
            bad = int(np.argmin(ok))
            raise AdmissibilityError(
                f"{self.describe_violation(np.atleast_2d(U)[bad])} at index {bad}"
            )

    def describe_violation(self, u) -> str:
        return f"inadmissible state {u}"

    def entropy(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def entropy_flux(self, U: np.ndarray) -> np.ndarray:
        """q(U) for the model's entropy, shape (..., d)."""
        raise NotImplementedError

    def entropy_pair(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        self.check_admissible(u)
        return float(self.entropy(u)[0]), self.entropy_flux(u)[0]

    def in_invariant_set(self, set_params, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _as_batch(U):
    U = np.asarray(U, dtype=float)
    return U if U.ndim == 2 else U[None, :]


# ---------------------------------------------------------------------------
# scalar conservation laws


@dataclass(frozen=True)
class ScalarModel(System):
    """Scalar law u_t + div f(u) = 0 with user-supplied flux.

    ``flux_fn`` maps an array of values to an array with a trailing axis
    of length d.  ``dflux_fn`` is optional; with ``convex=True`` it
    enables the sharp two-point bound for convex fluxes.  Otherwise the
    wave speed falls back to a Lipschitz estimate: the exact callback
    ``lipschitz_fn(n, lo, hi)`` when given, else dense sampling of the
    derivative (1024 points, inflated by 1.01 -- a heuristic for
    user-supplied fluxes without a certified bound).
    """

    d: int
    flux_fn: Callable = field(repr=False)
    dflux_fn: Callable | None = field(default=None, repr=False)
    convex: bool = False
    lipschitz_fn: Callable | None = field(default=None, repr=False)
    entropy_flux_fn: Callable | None = field(default=None, repr=False)
    samples: int = 1024
    m: int = 1

    def flux(self, U):
        U = _as_batch(U)
        f = np.asarray(self.flux_fn(U[:, 0]))
        return f.reshape(U.shape[0], 1, self.d)

    def admissible_mask(self, U):
        return np.isfinite(_as_batch(U)).all(axis=1)

    def describe_violation(self, u):
        return f"non-finite scalar state {u}"

    def max_wave_speed_batch(self, n, UL, UR):
        n = np.asarray(n, dtype=float)
        uL = _as_batch(UL)[:, 0]
        uR = _as_batch(UR)[:, 0]
        if np.any(~np.isfinite(uL)) or np.any(~np.isfinite(uR)):
            raise AdmissibilityError("non-finite Riemann data")
        if self.convex and self.dflux_fn is not None:
            sL = np.einsum("ed,ed->e", n, np.asarray(self.dflux_fn(uL)).reshape(len(uL), self.d))
            sR = np.einsum("ed,ed->e", n, np.asarray(self.dflux_fn(uR)).reshape(len(uR), self.d))
            rar = np.maximum(np.abs(sL), np.abs(sR))
            du = uL - uR
            safe = np.where(du == 0.0, 1.0, du)
            fL = np.asarray(self.flux_fn(uL)).reshape(len(uL), self.d)
            fR = np.asarray(self.flux_fn(uR)).reshape(len(uR), self.d)
            shock = np.abs(np.einsum("ed,ed->e", n, fL - fR) / safe)
            shock = np.where(du == 0.0, rar, shock)
            return np.where(sL <= sR, rar, shock)
        lo = np.minimum(uL, uR)
        hi = np.maximum(uL, uR)
        if self.lipschitz_fn is not None:
            return np.asarray(self.lipschitz_fn(n, lo, hi), dtype=float)
        out = np.empty(len(lo))
        for e in range(len(lo)):
            out[e] = self._sampled_lipschitz(n[e], lo[e], hi[e])
        return out

    def _sampled_lipschitz(self, n, lo, hi):
        us = np.linspace(lo, hi, self.samples) if hi > lo else np.array([lo])
        if self.dflux_fn is not None:
            der = np.asarray(self.dflux_fn(us)).reshape(len(us), self.d)
        else:
            eps = max(1e-7, 1e-7 * (hi - lo))
            fp = np.asarray(self.flux_fn(us + eps)).reshape(len(us), self.d)
            fm = np.asarray(self.flux_fn(us - eps)).reshape(len(us), self.d)
            der = (fp - fm) / (2.0 * eps)
        return 1.01 * np.abs(der @ n).max()

    def entropy(self, U):
        return 0.5 * _as_batch(U)[:, 0] ** 2

    def entropy_flux(self, U):
        u = _as_batch(U)[:, 0]
        if self.entropy_flux_fn is not None:
            return np.asarray(self.entropy_flux_fn(u)).reshape(len(u), self.d)
        # q(u) = u f(u) - int_0^u f(s) ds, normalized so q(0) = 0
        out = np.empty((len(u), self.d))
        f = np.asarray(self.flux_fn(u)).reshape(len(u), self.d)
        for d in range(self.d):
            comp = lambda s, dd=d: np.asarray(self.flux_fn(np.asarray([s]))).reshape(1, self.d)[0, dd]
            for e, ue in enumerate(u):
                integral, _ = quad(comp, 0.0, ue, epsabs=1e-10, epsrel=1e-10)
                out[e, d] = ue * f[e, d] - integral
        return out

    def in_invariant_set(self, set_params, U):
        a, b = set_params
        u = _as_batch(U)[:, 0]
        return (u >= a - ADMISSIBLE_TOL) & (u <= b + ADMISSIBLE_TOL)


def linear_model(velocity) -> ScalarModel:
    """Linear transport with constant velocity vector ``a``."""
    a = np.atleast_1d(np.asarray(velocity, dtype=float))
    d = len(a)
    return ScalarModel(
        d=d,
        flux_fn=lambda u: np.multiply.outer(np.asarray(u), a),
        dflux_fn=lambda u: np.broadcast_to(a, np.shape(u) + (d,)).copy(),
        convex=True,
        lipschitz_fn=lambda n, lo, hi: np.abs(np.asarray(n) @ a)
        * np.ones(np.shape(lo)),
    )


def burgers_model() -> ScalarModel:
    return ScalarModel(
        d=1,
        flux_fn=lambda u: (0.5 * np.asarray(u) ** 2)[..., None],
        dflux_fn=lambda u: np.asarray(u)[..., None],
        convex=True,
        entropy_flux_fn=lambda u: (np.asarray(u) ** 3 / 3.0)[..., None],
    )


def kpp_model() -> ScalarModel:
    """Rotating-wave scalar flux f(u) = (sin u, cos u).

    The derivative has unit norm, so 1 is an exact Lipschitz bound for
    n . f over any interval; the entropy flux is the closed-form
    antiderivative of s f'(s), pinned to q(0) = 0.
    """

    def flux(u):
        u = np.asarray(u)
        return np.stack([np.sin(u), np.cos(u)], axis=-1)

    def dflux(u):
        u = np.asarray(u)
        return np.stack([np.cos(u), -np.sin(u)], axis=-1)

    def qflux(u):
        u = np.asarray(u)
        return np.stack(
            [u * np.sin(u) + np.cos(u) - 1.0, u * np.cos(u) - np.sin(u)], axis=-1
        )

    return ScalarModel(
        d=2,
        flux_fn=flux,
        dflux_fn=dflux,
        convex=False,
        lipschitz_fn=lambda n, lo, hi: np.ones(np.shape(lo), dtype=float),
        entropy_flux_fn=qflux,
    )


# ---------------------------------------------------------------------------
# p-system


@dataclass(frozen=True)
class PSystemModel(System):
    """Isentropic gas dynamics in Lagrangian coordinates, states (v, u).

    Pressure follows the gamma-law p(v) = r v^(-gamma).  The flux is the
    hyperbolic form (-u, p(v)), whose characteristic speeds are
    +-sqrt(-p'(v)).
    """

    r: float = 1.0
    gamma: float = 3.0
    m: int = 2
    d: int = 1

    def __post_init__(self):
        if self.r <= 0.0 or self.gamma < 1.0:
            raise ValueError(f"need r > 0 and gamma >= 1, got r={self.r}, gamma={self.gamma}")

    def pressure(self, v):
        return self.r * np.asarray(v, dtype=float) ** (-self.gamma)

    def dpressure(self, v):
        return -self.r * self.gamma * np.asarray(v, dtype=float) ** (-self.gamma - 1.0)

    def sound_speed(self, v):
        """Lagrangian characteristic speed sqrt(-p'(v))."""
        return np.sqrt(-self.dpressure(v))

    def flux(self, U):
        U = _as_batch(U)
        v, u = U[:, 0], U[:, 1]
        f = np.empty((len(v), 2, 1))
        f[:, 0, 0] = -u
        f[:, 1, 0] = self.pressure(v)
        return f

    def admissible_mask(self, U):
        U = _as_batch(U)
        return np.isfinite(U).all(axis=1) & (U[:, 0] > 0.0)

    def describe_violation(self, u):
        return f"nonpositive specific volume in state {u}"

    def riemann_invariants(self, U):
        """(w1, w2) with the closed-form tail integral of sqrt(-p')."""
        U = _as_batch(U)
        v, u = U[:, 0], U[:, 1]
        if np.any(v <= 0.0):
            raise AdmissibilityError("nonpositive specific volume")
        g, r = self.gamma, self.r
        if g == 1.0:
            tail = np.sqrt(r) * np.log(v)
            return u - tail, u + tail
        tail = (2.0 * np.sqrt(g * r) / (g - 1.0)) * v ** (-(g - 1.0) / 2.0)
        return u + tail, u - tail

    def _fZ(self, v, vZ):
        """Wave curve function: shock branch below vZ, integral branch above."""
        v = np.asarray(v, dtype=float)
        vZ = np.asarray(vZ, dtype=float)
        g, r = self.gamma, self.r
        shock = -np.sqrt(np.maximum((self.pressure(v) - self.pressure(vZ)) * (vZ - v), 0.0))
        coef = 2.0 * np.sqrt(g * r) / (g - 1.0)
        rar = coef * (vZ ** (-(g - 1.0) / 2.0) - v ** (-(g - 1.0) / 2.0))
        return np.where(v <= vZ, shock, rar)

    def _dfZ(self, v, vZ):
        v = np.asarray(v, dtype=float)
        vZ = np.asarray(vZ, dtype=float)
        prod = (self.pressure(v) - self.pressure(vZ)) * (vZ - v)
        root = np.sqrt(np.maximum(prod, 1e-300))
        num = self.dpressure(v) * (vZ - v) - (self.pressure(v) - self.pressure(vZ))
        dshock = -num / (2.0 * root)
        drar = self.sound_speed(v)
        # the shock-branch derivative degenerates at v = vZ; its limit is sqrt(-p')
        dshock = np.where(prod < 1e-280, drar, dshock)
        return np.where(v <= vZ, dshock, drar)

    def phi(self, v, uL, uR):
        """phi(v) = f_L(v) + f_R(v) + uL - uR; root is the star volume."""
        vL, uLv = np.asarray(uL, dtype=float).reshape(-1, 2)[:, 0], np.asarray(uL, dtype=float).reshape(-1, 2)[:, 1]
        vR, uRv = np.asarray(uR, dtype=float).reshape(-1, 2)[:, 0], np.asarray(uR, dtype=float).reshape(-1, 2)[:, 1]
        return self._fZ(v, vL) + self._fZ(v, vR) + uLv - uRv

    def v0(self, uL, uR) -> float:
        """Certified under-estimate of the star volume from the invariant box."""
        if self.gamma <= 1.0:
            raise ValueError("v0 formula needs gamma > 1")
        w1L, w2L = self.riemann_invariants(uL)
        w1R, w2R = self.riemann_invariants(uR)
        w1max = max(float(w1L[0]), float(w1R[0]))
        w2min = min(float(w2L[0]), float(w2R[0]))
        gap = w1max - w2min
        if gap <= 0.0:
            raise AdmissibilityError("inadmissible pair: w1_max <= w2_min")
        g, r = self.gamma, self.r
        return float(
            (g * r) ** (1.0 / (g - 1.0)) * (4.0 / ((g - 1.0) * gap)) ** (2.0 / (g - 1.0))
        )

    def _v0_batch(self, vL, uLv, vR, uRv):
        g, r = self.gamma, self.r
        coef = 2.0 * np.sqrt(g * r) / (g - 1.0)
        w1 = np.maximum(uLv + coef * vL ** (-(g - 1.0) / 2.0),
                        uRv + coef * vR ** (-(g - 1.0) / 2.0))
        w2 = np.minimum(uLv - coef * vL ** (-(g - 1.0) / 2.0),
                        uRv - coef * vR ** (-(g - 1.0) / 2.0))
        gap = w1 - w2
        return (g * r) ** (1.0 / (g - 1.0)) * (4.0 / ((g - 1.0) * gap)) ** (2.0 / (g - 1.0))

    def max_wave_speed_batch(self, n, UL, UR):
        n = np.asarray(n, dtype=float).reshape(-1, 1)
        UL = _as_batch(UL).copy()
        UR = _as_batch(UR).copy()
        flip = n[:, 0] < 0.0
        if np.any(flip):
            UL[flip], UR[flip] = UR[flip].copy(), UL[flip].copy()
        vL, uLv = UL[:, 0], UL[:, 1]
        vR, uRv = UR[:, 0], UR[:, 1]
        if np.any(vL <= 0.0) or np.any(vR <= 0.0):
            raise AdmissibilityError("nonpositive specific volume in Riemann data")
        radicand = np.maximum((vL - vR) * (self.pressure(vR) - self.pressure(vL)), 0.0)
        two_shock = (uLv - uRv) >= np.sqrt(radicand)
        vmin = np.minimum(vL, vR)
        lam = self.sound_speed(vmin)
        # equal states produce no waves; the sound speed already bounds them
        equal = (vL == vR) & (uLv == uRv)
        idx = np.nonzero(two_shock & ~equal)[0]
        if len(idx):
            vhat = self._vstar_lower(vL[idx], uLv[idx], vR[idx], uRv[idx], vmin[idx])
            lam[idx] = self.sound_speed(vhat)
        return lam

    def entropy(self, U):
        U = _as_batch(U)
        self.check_admissible(U)
        v, u = U[:, 0], U[:, 1]
        g, r = self.gamma, self.r
        if g == 1.0:
            return 0.5 * u ** 2 - r * np.log(v)
        return 0.5 * u ** 2 + r * v ** (1.0 - g) / (g - 1.0)

    def entropy_flux(self, U):
        U = _as_batch(U)
        return (U[:, 1] * self.pressure(U[:, 0]))[:, None]

    def in_invariant_set(self, set_params, U):
        a, b = set_params
        w1, w2 = self.riemann_invariants(U)
        return (w2 >= a - ADMISSIBLE_TOL) & (w1 <= b + ADMISSIBLE_TOL)

    def _vstar_lower(self, vL, uLv, vR, uRv, vmin):
        """Newton from below on the concave increasing two-shock residual.

        Every iterate stays a lower bracket of the star volume, so the
        returned value certifies the speed bound from above.
        """
        v = np.minimum(self._v0_batch(vL, uLv, vR, uRv), vmin)
        du = uLv - uRv

        def f(x, sel):
            return self._fZ(x, vL[sel]) + self._fZ(x, vR[sel]) + du[sel]

        def df(x, sel):
            return self._dfZ(x, vL[sel]) + self._dfZ(x, vR[sel])

        active = np.ones(len(v), dtype=bool)
        for _ in range(NEWTON_MAXIT):
            if not active.any():
                break
            sub = np.nonzero(active)[0]
            va = v[sub]
            step = -f(va, sub) / df(va, sub)
            step = np.maximum(step, 0.0)  # phi(v) <= 0 below the root
            vnew = va + step
            # round-off can push past the root; keep the certified side
            over = f(vnew, sub) > 0.0
            vnew[over] = va[over]
            conv = (step <= NEWTON_RTOL * vnew) | over
            v[sub] = vnew
            active[sub[conv]] = False
        return v


# ---------------------------------------------------------------------------
# Euler


@dataclass(frozen=True)
class EulerModel(System):
    """Compressible Euler equations with ideal gas law p = (gamma-1) rho e."""

    gamma: float = 1.4
    d: int = 1

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ValueError(f"need gamma > 1, got {self.gamma}")

    @property
    def m(self) -> int:  # type: ignore[override]
        return self.d + 2

    def primitive(self, U):
        """(rho, velocity, internal energy density, pressure) per state."""
        U = _as_batch(U)
        rho = U[:, 0]
        mom = U[:, 1:1 + self.d]
        E = U[:, 1 + self.d]
        vel = mom / rho[:, None]
        e = E - 0.5 * np.einsum("ed,ed->e", mom, vel)
        p = (self.gamma - 1.0) * e
        return rho, vel, e, p

    def conserved(self, rho, vel, p):
        rho = np.asarray(rho, dtype=float)
        vel = np.asarray(vel, dtype=float).reshape(len(np.atleast_1d(rho)), self.d)
        p = np.asarray(p, dtype=float)
        U = np.empty((len(rho), self.m))
        U[:, 0] = rho
        U[:, 1:1 + self.d] = rho[:, None] * vel
        U[:, 1 + self.d] = p / (self.gamma - 1.0) + 0.5 * rho * np.einsum("ed,ed->e", vel, vel)
        return U

    def flux(self, U):
        U = _as_batch(U)
        rho, vel, e, p = self.primitive(U)
        E = U[:, 1 + self.d]
        f = np.empty((len(rho), self.m, self.d))
        mom = U[:, 1:1 + self.d]
        f[:, 0, :] = mom
        for a in range(self.d):
            for b in range(self.d):
                f[:, 1 + a, b] = mom[:, a] * vel[:, b]
            f[:, 1 + a, a] += p
        f[:, 1 + self.d, :] = vel * (E + p)[:, None]
        return f

    def admissible_mask(self, U):
        U = _as_batch(U)
        if U.shape[1] != self.m:
            raise ValueError(f"expected {self.m} components, got {U.shape[1]}")
        finite = np.isfinite(U).all(axis=1)
        rho = np.where(finite, U[:, 0], 1.0)
        ok = finite & (U[:, 0] > 0.0)
        mom = U[:, 1:1 + self.d]
        e = U[:, 1 + self.d] - 0.5 * np.einsum("ed,ed->e", mom, mom) / rho
        return ok & (e > 0.0)

    def describe_violation(self, u):
        u = np.asarray(u, dtype=float)
        if not np.isfinite(u).all():
            return f"non-finite state {u}"
        if u[0] <= 0.0:
            return f"nonpositive density in state {u}"
        return f"nonpositive internal energy in state {u}"

    def project(self, n, U):
        """Reduce a state to the 1D triple (rho, n-momentum, slab energy)."""
        n = np.asarray(n, dtype=float).reshape(-1, self.d)
        U = _as_batch(U)
        if np.any(U[:, 0] <= 0.0):
            raise AdmissibilityError("nonpositive density")
        rho = U[:, 0]
        mom = U[:, 1:1 + self.d]
        mn = np.einsum("ed,ed->e", mom, n)
        mperp2 = np.einsum("ed,ed->e", mom, mom) - mn ** 2
        E = U[:, 1 + self.d]
        return np.stack([rho, mn, E - 0.5 * mperp2 / rho], axis=1)

    def sound_speed(self, U):
        rho, _, _, p = self.primitive(U)
        return np.sqrt(self.gamma * p / rho)

    def specific_entropy(self, U):
        """s = log(p rho^-gamma); any increasing rescaling works equally."""
        U = _as_batch(U)
        self.check_admissible(U)
        rho, _, _, p = self.primitive(U)
        return np.log(p) - self.gamma * np.log(rho)

    def _toro_f(self, p, pZ, aZ, rhoZ):
        g = self.gamma
        A = 2.0 / ((g + 1.0) * rhoZ)
        B = (g - 1.0) / (g + 1.0) * pZ
        shock = (p - pZ) * np.sqrt(A / (p + B))
        rar = 2.0 * aZ / (g - 1.0) * ((p / pZ) ** ((g - 1.0) / (2.0 * g)) - 1.0)
        return np.where(p >= pZ, shock, rar)

    def _toro_df(self, p, pZ, aZ, rhoZ):
        g = self.gamma
        A = 2.0 / ((g + 1.0) * rhoZ)
        B = (g - 1.0) / (g + 1.0) * pZ
        shock = np.sqrt(A / (p + B)) * (1.0 - 0.5 * (p - pZ) / (p + B))
        rar = (1.0 / (rhoZ * aZ)) * (p / pZ) ** (-(g + 1.0) / (2.0 * g))
        return np.where(p >= pZ, shock, rar)

    def pressure_phi(self, p, stateL, stateR):
        """Pressure residual whose positive root is the star pressure.

        ``stateL``/``stateR`` are projected triples (rho, m, slab E).
        """
        (rhoL, uL, pL, aL), (rhoR, uR, pR, aR) = (
            self._triple_prim(stateL), self._triple_prim(stateR)
        )
        return (
            self._toro_f(p, pL, aL, rhoL)
            + self._toro_f(p, pR, aR, rhoR)
            + uR - uL
        )

    def _triple_prim(self, triple):
        t = np.asarray(triple, dtype=float).reshape(-1, 3)
        rho, mn, E = t[:, 0], t[:, 1], t[:, 2]
        u = mn / rho
        p = (self.gamma - 1.0) * (E - 0.5 * mn * u)
        a = np.sqrt(self.gamma * p / rho)
        return rho, u, p, a

    def max_wave_speed_batch(self, n, UL, UR):
        n = np.asarray(n, dtype=float).reshape(-1, self.d)
        UL = _as_batch(UL)
        UR = _as_batch(UR)
        if not self.admissible_mask(UL).all() or not self.admissible_mask(UR).all():
            raise AdmissibilityError("inadmissible Riemann data")
        tL = self.project(n, UL)
        tR = self.project(n, UR)
        rhoL, uL, pL, aL = self._triple_prim(tL)
        rhoR, uR, pR, aR = self._triple_prim(tR)
        g = self.gamma

        def phi(p):
            return (
                self._toro_f(p, pL, aL, rhoL)
                + self._toro_f(p, pR, aR, rhoR)
                + uR - uL
            )

        def dphi(p):
            return self._toro_df(p, pL, aL, rhoL) + self._toro_df(p, pR, aR, rhoR)

        phat = np.zeros(len(uL))
        vacuum = uR - uL >= 2.0 * aL / (g - 1.0) + 2.0 * aR / (g - 1.0)
        fast = (phi(pL) > 0.0) & (phi(pR) > 0.0)
        # equal states: the star pressure is the common pressure itself
        equal = (rhoL == rhoR) & (uL == uR) & (pL == pR)
        phat[equal] = pL[equal]
        need = ~(vacuum | fast | equal)
        if np.any(need):
            phat[need] = self._pstar_upper(
                pL[need], aL[need], rhoL[need],
                pR[need], aR[need], rhoR[need],
                uL[need], uR[need],
            )
        coef = (g + 1.0) / (2.0 * g)
        lam1 = uL - aL * np.sqrt(1.0 + coef * np.maximum((phat - pL) / pL, 0.0))
        lam3 = uR + aR * np.sqrt(1.0 + coef * np.maximum((phat - pR) / pR, 0.0))
        return np.maximum(np.abs(lam1), np.abs(lam3))

    def _pstar_upper(self, pL, aL, rhoL, pR, aR, rhoR, uL, uR):
        """Certified upper bound on the star pressure.

        Maintains a bracket [lo, hi] around the root of the concave
        increasing residual: Newton from lo ascends without crossing,
        regula falsi from above tightens hi from the certified side.  The
        upper end is returned.  On non-convergence the wide fallback
        bracket upper end 10 max(pL, pR) is used.
        """

        def phi(p, s):
            return (
                self._toro_f(p, pL[s], aL[s], rhoL[s])
                + self._toro_f(p, pR[s], aR[s], rhoR[s])
                + uR[s] - uL[s]
            )

        def dphi(p, s):
            return (
                self._toro_df(p, pL[s], aL[s], rhoL[s])
                + self._toro_df(p, pR[s], aR[s], rhoR[s])
            )

        pmax = np.maximum(pL, pR)
        pmin = np.minimum(pL, pR)
        everyone = np.arange(len(pL))
        hi = pmax.copy()
        bad = phi(hi, everyone) < 0.0
        for _ in range(60):
            if not bad.any():
                break
            hi[bad] *= 2.0
            bad = phi(hi, everyone) < 0.0
        # callers filter out the two-rarefaction fast path, so phi(pmin) <= 0
        lo = np.minimum(pmin, hi)
        active = np.ones(len(lo), dtype=bool)
        for _ in range(NEWTON_MAXIT):
            if not active.any():
                break
            sub = np.nonzero(active)[0]
            l, h = lo[sub], hi[sub]
            fl, fh = phi(l, sub), phi(h, sub)
            # Newton from below (concave => stays below the root)
            dl = dphi(l, sub)
            ln = np.where((dl > 0.0) & np.isfinite(dl), l - fl / dl, l)
            ln = np.clip(ln, l, h)
            # secant root lies above the root for concave residuals
            denom = fh - fl
            hn = np.where(denom > 0.0, l - fl * (h - l) / denom, h)
            hn = np.clip(hn, ln, h)
            conv = (hn - ln) <= NEWTON_RTOL * np.maximum(hn, 1e-300)
            lo[sub] = ln
            hi[sub] = hn
            active[sub[conv]] = False
        if active.any():
            hi[active] = 10.0 * pmax[active]
        return hi

    def entropy(self, U):
        return -_as_batch(U)[:, 0] * self.specific_entropy(U) / (self.gamma - 1.0)

    def entropy_flux(self, U):
        U = _as_batch(U)
        _, vel, _, _ = self.primitive(U)
        return self.entropy(U)[:, None] * vel

    def in_invariant_set(self, set_params, U):
        r = float(set_params)
        U = _as_batch(U)
        rho = U[:, 0]
        mom = U[:, 1:1 + self.d]
        e = U[:, 1 + self.d] - 0.5 * np.einsum("ed,ed->e", mom, mom) / np.where(rho > 0, rho, 1.0)
        ok = (rho >= -ADMISSIBLE_TOL) & (e >= -ADMISSIBLE_TOL)
        s = np.full(len(rho), -np.inf)
        pos = (rho > 0.0) & (e > 0.0)
        p = (self.gamma - 1.0) * e[pos]
        s[pos] = np.log(p) - self.gamma * np.log(rho[pos])
        return ok & (s >= r - ADMISSIBLE_TOL)
