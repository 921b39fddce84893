"""Incremental kernelized ridge regression with UCB scoring.

Two exact state representations back the same contract:

* :class:`DualState` stores the observations and maintains the inverse of
  the regularized Gram matrix ``(K + lam*I)^{-1}`` through bordered
  (Schur-complement) rank-1 growth, the form all policies are specified in.
* :class:`PrimalState` is used when the composed kernel admits an exact
  finite feature map (linear network x linear action factors).  Ridge
  regression in that feature space reproduces the dual mean, variance and
  log-det values to machine precision at O(p^2) per update instead of
  O(n^2), which is what makes dense-network experiments tractable.

Both refresh their maintained inverse from a dense solve periodically to
bound floating-point drift over long runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .kernels import (
    LINEAR,
    AugmentedContext,
    ComposedKernel,
    eval_composed,
    eval_kernel,
    kernel_matrix,
    kernel_row,
)

REFRESH_INTERVAL = 512
VARIANCE_FLOOR = -1e-10


class NumericalCorruptionError(RuntimeError):
    """A maintained inverse produced values impossible for PSD algebra."""


@dataclass(frozen=True)
class UcbParams:
    """Exploration parameters for UCB scoring.

    ``tunable`` mode scales the posterior deviation by eta/sqrt(lam);
    ``theoretical`` mode uses the concentration-based multiplier
    B + R*sqrt(logdet((K+lam*I)/lam) + 2*log(V/delta)) for simultaneous
    coverage across V agents.
    """

    eta: float = 1.0
    lam: float = 1.0
    mode: str = "tunable"
    B: float = 1.0
    R: float = 1.0
    delta: float = 0.1
    V: int = 1

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.mode not in ("tunable", "theoretical"):
            raise ValueError(f"unknown ucb mode {self.mode!r}")


class _StateBase:
    """Shared scoring logic on top of a mean/variance provider.

    ``strict_psd`` distinguishes exact kernels from online-estimated ones.
    With an exact PSD kernel a negative variance can only mean the
    maintained inverse is corrupted, so it raises.  An estimated network
    kernel is not guaranteed PSD and its values move between insertions,
    so small negative variances are a model artifact: they are clamped to
    zero and counted in ``psd_violations`` for reporting.
    """

    lam: float
    count: int
    strict_psd: bool = True
    psd_violations: int = 0

    def predict_mean(self, point: AugmentedContext) -> float:
        raise NotImplementedError

    def predict_variance(self, point: AugmentedContext) -> float:
        raise NotImplementedError

    def log_det_regularized(self) -> float:
        raise NotImplementedError

    def exploration_multiplier(self, params: UcbParams) -> float:
        """Width multiplier applied to the posterior deviation."""
        if params.mode == "tunable":
            return params.eta / math.sqrt(params.lam)
        logdet = self.log_det_regularized()
        return params.B + params.R * math.sqrt(
            max(0.0, logdet) + 2.0 * math.log(params.V / params.delta)
        )


    def ucb_score(self, point: AugmentedContext, params: UcbParams) -> float:
        return self.predict_mean(point) + self.exploration_multiplier(params) * math.sqrt(
            self.predict_variance(point)
        )

    def batch_scores(self, z, arms, agent: int, params: UcbParams):
        """UCB scores for every arm x in ``arms`` paired with one context z."""
        means, variances = self.batch_mean_variance(z, arms, agent)
        return means + self.exploration_multiplier(params) * np.sqrt(variances)

    def _check_variance(self, v: np.ndarray) -> np.ndarray:
        low = float(np.min(v)) if v.size else 0.0
        if low < VARIANCE_FLOOR:
            if self.strict_psd:
                raise NumericalCorruptionError(
                    f"variance {low} below tolerance: maintained inverse "
                    "corrupted"
                )
            self.psd_violations += 1
        return np.maximum(v, 0.0)

    def _check_scalar_variance(self, v: float) -> float:
        if v < VARIANCE_FLOOR:
            if self.strict_psd:
                raise NumericalCorruptionError(
                    f"variance {v} below tolerance: maintained inverse "
                    "corrupted"
                )
            self.psd_violations += 1
        return max(v, 0.0)


class DualState(_StateBase):
    """Kernel ridge state with an incrementally maintained Gram inverse."""

    def __init__(self, ck: ComposedKernel, lam: float,
                 refresh_every: int = REFRESH_INTERVAL,
                 strict_psd: bool | None = None):
        if not lam > 0:
            raise ValueError("lam must be positive")
        self.ck = ck
        self.lam = float(lam)
        self.refresh_every = refresh_every
        self.strict_psd = ck.network_is_spec if strict_psd is None else strict_psd
        self.psd_violations = 0
        self.count = 0
        self._cap = 0
        self._since_refresh = 0
        self._since_repair = 0  # throttles indefiniteness-triggered refreshes
        self._logdet_sum = 0.0  # running sum of log Schur complements

    def _ensure_capacity(self, point: AugmentedContext):
        if self._cap == 0:
            dz, dx = len(point.z), len(point.x)
            self._cap = 16
            self._Z = np.empty((self._cap, dz))
            self._X = np.empty((self._cap, dx))
            self._ids = np.empty(self._cap, dtype=np.int64)
            self._y = np.empty(self._cap)
            self._G = np.zeros((self._cap, self._cap))
            self._M = np.zeros((self._cap, self._cap))
        elif self.count == self._cap:
            new = self._cap * 2
            for name in ("_Z", "_X", "_ids", "_y"):
                old = getattr(self, name)
                buf = np.empty((new,) + old.shape[1:], dtype=old.dtype)
                buf[: self.count] = old[: self.count]
                setattr(self, name, buf)
            for name in ("_G", "_M"):
                old = getattr(self, name)
                buf = np.zeros((new, new))
                buf[: self.count, : self.count] = old[: self.count, : self.count]
                setattr(self, name, buf)
            self._cap = new

    def _network_row(self, point: AugmentedContext, n: int) -> np.ndarray:
        if self.ck.network_is_spec:
            return kernel_row(self.ck.network, self._Z, np.asarray(point.z, float), n=n)
        return self.ck.network.row(self._ids[:n], point.agent)

    def kappa(self, point: AugmentedContext) -> np.ndarray:
        """Kernel values between ``point`` and every stored observation."""
        n = self.count
        kx = kernel_row(self.ck.action, self._X, np.asarray(point.x, float), n=n)
        return self._network_row(point, n) * kx

    def incorporate(self, point: AugmentedContext, y: float):
        self._ensure_capacity(point)
        n = self.count
        kqq = eval_composed(self.ck, point, point)
        if n == 0:
            s = kqq + self.lam
            if s <= 0:
                raise NumericalCorruptionError(f"nonpositive initial pivot {s}")
            self._M[0, 0] = 1.0 / s
            self._G[0, 0] = kqq
        else:
            kap = self.kappa(point)
            u = self._M[:n, :n] @ kap
            s = kqq + self.lam - float(kap @ u)
            floor = 1e-2 * self.lam
            if s <= floor:
                if self.strict_psd:
                    # exact PSD kernels guarantee s >= lam, so even reaching
                    # the floor means the kernel or the inverse is broken
                    raise NumericalCorruptionError(
                        f"Schur complement {s} impossible for a PSD kernel "
                        f"with lam={self.lam}: kernel bug or corrupted inverse"
                    )
                # The estimated kernel turned indefinite.  Append the point
                # block-diagonally (bounded, never amplifying) and schedule a
                # clipped-spectrum rebuild from the raw stored entries; the
                # rebuild is throttled so bursts of violations at large n do
                # not degenerate into an eigendecomposition per update.
                self.psd_violations += 1
                self._M[:n, n] = 0.0
                self._M[n, :n] = 0.0
                self._M[n, n] = 1.0 / (max(kqq, 0.0) + self.lam)
                s = floor
                if self._since_repair >= 25:
                    self._since_refresh = self.refresh_every
            else:
                backend.grow_inverse(
                    self._M, np.ascontiguousarray(u), 1.0 / s, n
                )
            self._G[:n, n] = kap
            self._G[n, :n] = kap
            self._G[n, n] = kqq
        self._logdet_sum += math.log(s)
        self._Z[n] = point.z
        self._X[n] = point.x
        self._ids[n] = point.agent
        self._y[n] = y
        self.count = n + 1
        self._since_refresh += 1
        self._since_repair += 1
        if self._since_refresh >= self.refresh_every:
            self.refresh()
        return self

    def refresh(self):
        """Rebuild the inverse from the stored Gram entries (drift hygiene).

        With an exact kernel the stored regularized Gram must be positive
        definite, so losing positivity is an error.  With an estimated
        kernel the stored entries can be indefinite; their spectrum is then
        clipped from below before inverting, which is the closest positive
        definite surrogate of the recorded similarity data.
        """
        n = self.count
        reg = self._G[:n, :n] + self.lam * np.eye(n)
        if self.strict_psd:
            self._M[:n, :n] = np.linalg.inv(reg)
            sign, logdet = np.linalg.slogdet(reg)
            if sign <= 0:
                raise NumericalCorruptionError(
                    "regularized Gram lost positivity"
                )
            self._logdet_sum = logdet
        else:
            floor = 1e-2 * self.lam
            eigvals, eigvecs = np.linalg.eigh(reg)
            if eigvals[0] < floor:
                self.psd_violations += 1
                eigvals = np.maximum(eigvals, floor)
            self._M[:n, :n] = (eigvecs / eigvals) @ eigvecs.T
            self._logdet_sum = float(np.sum(np.log(eigvals)))
        self._since_refresh = 0
        self._since_repair = 0

    def predict_mean(self, point: AugmentedContext) -> float:
        if self.count == 0:
            raise ValueError("empty state")
        n = self.count
        return float(self.kappa(point) @ (self._M[:n, :n] @ self._y[:n]))

    def predict_variance(self, point: AugmentedContext) -> float:
        if self.count == 0:
            raise ValueError("empty state")
        n = self.count
        kap = self.kappa(point)
        kqq = eval_composed(self.ck, point, point)
        v = kqq - float(kap @ (self._M[:n, :n] @ kap))
        return self._check_scalar_variance(v)

    def batch_mean_variance(self, z, arms, agent: int):
        if self.count == 0:
            raise ValueError("empty state")
        n = self.count
        arms = np.asarray(arms, dtype=float)
        z = np.asarray(z, dtype=float)
        kx = kernel_matrix(self.ck.action, arms, self._X[:n])
        probe = AugmentedContext(z=z, x=arms[0], agent=agent)
        kmat = kx * self._network_row(probe, n)[None, :]
        W = kmat @ self._M[:n, :n]
        means = W @ self._y[:n]
        diag = self._self_similarity(z, arms, agent)
        variances = self._check_variance(diag - np.sum(W * kmat, axis=1))
        return means, variances

    def _self_similarity(self, z, arms, agent: int) -> np.ndarray:
        """K((z, x_i), (z, x_i)) for each arm, vectorized per family."""
        if self.ck.network_is_spec:
            kz_diag = eval_kernel(self.ck.network, z, z)
        else:
            kz_diag = float(self.ck.network.value(agent, agent))
        if self.ck.action.family == LINEAR:
            kx_diag = np.sum(arms * arms, axis=1)
        else:
            kx_diag = np.ones(len(arms))
        return kz_diag * kx_diag

    def log_det_regularized(self) -> float:
        if self.count == 0:
            raise ValueError("empty state")
        return self._logdet_sum - self.count * math.log(self.lam)

    def gram(self) -> np.ndarray:
        """Stored kernel values (frozen at insertion time)."""
        return self._G[: self.count, : self.count].copy()

    def inverse(self) -> np.ndarray:
        return self._M[: self.count, : self.count].copy()

    def rewards(self) -> np.ndarray:
        return self._y[: self.count].copy()


class PrimalState(_StateBase):
    """Exact finite-feature twin of :class:`DualState` for linear factors."""

    def __init__(self, ck: ComposedKernel, lam: float,
                 refresh_every: int = REFRESH_INTERVAL):
        if not ck.has_finite_features:
            raise ValueError("primal state requires linear/linear composition")
        if not lam > 0:
            raise ValueError("lam must be positive")
        self.ck = ck
        self.lam = float(lam)
        self.refresh_every = refresh_every
        self.count = 0
        self._dim = 0
        self._since_refresh = 0

    def _init_dims(self, phi: np.ndarray):
        p = len(phi)
        self._dim = p
        self._Ainv = np.eye(p) / self.lam
        self._b = np.zeros(p)
        self._logdet_A = p * math.log(self.lam)
        self._cap = 64
        self._Phi = np.empty((self._cap, p))
        self._y = np.empty(self._cap)

    def incorporate(self, point: AugmentedContext, y: float):
        phi = self.ck.features(point)
        if self._dim == 0:
            self._init_dims(phi)
        elif len(phi) != self._dim:
            raise ValueError("feature dimension changed between points")
        if self.count == self._cap:
            self._cap *= 2
            for name in ("_Phi", "_y"):
                old = getattr(self, name)
                buf = np.empty((self._cap,) + old.shape[1:])
                buf[: self.count] = old[: self.count]
                setattr(self, name, buf)
        phi = np.ascontiguousarray(phi)
        s = backend.sherman_morrison(self._Ainv, phi)
        if s <= 0:
            raise NumericalCorruptionError(f"nonpositive determinant ratio {s}")
        self._logdet_A += math.log(s)
        self._b += y * phi
        self._Phi[self.count] = phi
        self._y[self.count] = y
        self.count += 1
        self._since_refresh += 1
        if self._since_refresh >= self.refresh_every:
            self.refresh()
        return self

    def refresh(self):
        n, p = self.count, self._dim
        A = self.lam * np.eye(p) + self._Phi[:n].T @ self._Phi[:n]
        self._Ainv = np.linalg.inv(A)
        self._logdet_A = np.linalg.slogdet(A)[1]
        self._since_refresh = 0

    def predict_mean(self, point: AugmentedContext) -> float:
        if self.count == 0:
            raise ValueError("empty state")
        return float(self.ck.features(point) @ (self._Ainv @ self._b))

    def predict_variance(self, point: AugmentedContext) -> float:
        if self.count == 0:
            raise ValueError("empty state")
        phi = self.ck.features(point)
        v = self.lam * float(phi @ (self._Ainv @ phi))
        return self._check_scalar_variance(v)

    def batch_mean_variance(self, z, arms, agent: int):
        if self.count == 0:
            raise ValueError("empty state")
        arms = np.asarray(arms, dtype=float)
        z = np.asarray(z, dtype=float)
        phis = (z[None, :, None] * arms[:, None, :]).reshape(len(arms), -1)
        U = phis @ self._Ainv
        means = U @ self._b
        variances = self._check_variance(self.lam * np.sum(U * phis, axis=1))
        return means, variances

    def log_det_regularized(self) -> float:
        # det((1/lam) K_n + I_n) = det(A_n / lam) by the Weinstein-Aronszajn
        # identity, with A_n = lam*I + Phi^T Phi.
        if self.count == 0:
            raise ValueError("empty state")
        return self._logdet_A - self._dim * math.log(self.lam)


def make_state(ck: ComposedKernel, lam: float, representation: str = "auto",
               refresh_every: int = REFRESH_INTERVAL):
    """Create an empty regression state with the chosen representation."""
    if representation == "auto":
        representation = "primal" if ck.has_finite_features else "dual"
    if representation == "primal":
        return PrimalState(ck, lam, refresh_every)
    if representation == "dual":
        return DualState(ck, lam, refresh_every)
    raise ValueError(f"unknown representation {representation!r}")


def init_state(point: AugmentedContext, y: float, lam: float,
               ck: ComposedKernel, representation: str = "auto",
               refresh_every: int = REFRESH_INTERVAL):
    """One-observation state; the 1x1 inverse is 1/(K(p,p) + lam)."""
    return make_state(ck, lam, representation, refresh_every).incorporate(point, y)
