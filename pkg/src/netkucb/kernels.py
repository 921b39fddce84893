"""Kernels on action and network contexts, their compositions, and Gram matrices.

All kernel evaluation is pure and side-effect free.  The network factor of a
composed kernel is either a :class:`KernelSpec` evaluated on context vectors
or any object exposing ``value(agent_i, agent_j)`` / ``row(agent_ids, agent_j)``
(an online-estimated agent-similarity kernel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend

LINEAR = "linear"
RBF = "rbf"
MATERN = "matern"

_MATERN_SMOOTHNESS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its parameters.

    ``bandwidth`` applies to rbf, ``lengthscale``/``nu`` to matern.  The rbf
    and matern families are normalized (K(x, x) = 1); the linear kernel is
    not, and relies on contexts living in the unit ball.
    """

    family: str
    bandwidth: float = 1.0
    lengthscale: float = 1.0
    nu: float = 1.5

    def __post_init__(self):
        if self.family not in (LINEAR, RBF, MATERN):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == RBF and not self.bandwidth > 0:
            raise ValueError("rbf bandwidth must be positive")
        if self.family == MATERN:
            if not self.lengthscale > 0:
                raise ValueError("matern lengthscale must be positive")
            if self.nu not in _MATERN_SMOOTHNESS:
                raise ValueError(
                    f"matern smoothness must be one of {_MATERN_SMOOTHNESS}"
                )


@dataclass(frozen=True, eq=False)
class AugmentedContext:
    """Pair of a network context z and an action context x.

    ``agent`` records the originating agent id; it is only consulted when the
    network kernel is estimated online (agent-indexed) rather than evaluated
    on z vectors.
    """

    z: np.ndarray
    x: np.ndarray
    agent: int = -1


@dataclass(frozen=True, eq=False)
class ComposedKernel:
    """Product kernel over augmented contexts: K((z,x),(z',x')) = K_z * K_x."""

    network: object  # KernelSpec or an agent-indexed kernel handle
    action: KernelSpec
    mode: str = "hadamard"

    def __post_init__(self):
        if self.mode != "hadamard":
            raise ValueError("composed kernels evaluate pointwise only in "
                             "hadamard mode; sum/kronecker are Gram-level")

    @property
    def network_is_spec(self) -> bool:
        return isinstance(self.network, KernelSpec)

    @property
    def has_finite_features(self) -> bool:
        """True when the composition admits an exact finite feature map.

        Linear x linear factors give K = <z (x) x, z' (x) x'>, so ridge
        regression in the kron feature space reproduces the kernel solution
        exactly (used by the fast regression path).
        """
        return (
            self.network_is_spec
            and self.network.family == LINEAR
            and self.action.family == LINEAR
        )

    def features(self, p: AugmentedContext) -> np.ndarray:
        if not self.has_finite_features:
            raise ValueError("composition has no exact finite feature map")
        return np.kron(np.asarray(p.z, float), np.asarray(p.x, float))


def eval_kernel(spec: KernelSpec, a, b) -> float:
    """Evaluate one kernel value K(a, b) on same-dimension vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if spec.family == LINEAR:
        return float(a @ b)
    if spec.family == RBF:
        d = a - b
        return float(np.exp(-(d @ d) / (2.0 * spec.bandwidth**2)))
    r = float(np.linalg.norm(a - b)) / spec.lengthscale
    if spec.nu == 0.5:
        return float(np.exp(-r))
    if spec.nu == 1.5:
        t = np.sqrt(3.0) * r
        return float((1.0 + t) * np.exp(-t))
    t = np.sqrt(5.0) * r
    return float((1.0 + t + t * t / 3.0) * np.exp(-t))


def kernel_row(spec: KernelSpec, P: np.ndarray, q: np.ndarray, out=None, n=None):
    """Vector of kernel values between each row of P[:n] and the point q."""
    P = np.ascontiguousarray(P, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    if n is None:
        n = P.shape[0]
    if out is None:
        out = np.empty(n)
    if P.shape[1] != q.shape[0]:
        raise ValueError(f"dimension mismatch: {P.shape[1]} vs {q.shape[0]}")
    if spec.family == LINEAR:
        backend.linear_row(P, q, out, n)
    elif spec.family == RBF:
        backend.rbf_row(P, q, 1.0 / (2.0 * spec.bandwidth**2), out, n)
    else:
        backend.matern_row(P, q, spec.lengthscale, spec.nu, out, n)
    return out


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """All pairwise kernel values between rows of A and rows of B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if spec.family == LINEAR:
        return A @ B.T
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    if spec.family == RBF:
        return np.exp(-sq / (2.0 * spec.bandwidth**2))
    r = np.sqrt(sq) / spec.lengthscale
    if spec.nu == 0.5:
        return np.exp(-r)
    if spec.nu == 1.5:
        t = np.sqrt(3.0) * r
        return (1.0 + t) * np.exp(-t)
    t = np.sqrt(5.0) * r
    return (1.0 + t + t * t / 3.0) * np.exp(-t)


def eval_composed(ck: ComposedKernel, p: AugmentedContext, q: AugmentedContext) -> float:
    """K_z(p, q) * K_x(p.x, q.x)."""
    if ck.network_is_spec:
        kz = eval_kernel(ck.network, p.z, q.z)
    else:
        kz = float(ck.network.value(p.agent, q.agent))
    return kz * eval_kernel(ck.action, p.x, q.x)


def build_gram(ck: ComposedKernel, points) -> np.ndarray:
    """Symmetric matrix of pairwise composed-kernel values."""
    points = list(points)
    if not points:
        raise ValueError("empty point list")
    X = np.asarray([p.x for p in points], dtype=float)
    Kx = kernel_matrix(ck.action, X, X)
    if ck.network_is_spec:
        Z = np.asarray([p.z for p in points], dtype=float)
        Kz = kernel_matrix(ck.network, Z, Z)
    else:
        ids = [p.agent for p in points]
        Kz = np.asarray(
            [[ck.network.value(i, j) for j in ids] for i in ids], dtype=float
        )
    G = Kz * Kx
    return 0.5 * (G + G.T)


def gram_compose(A: np.ndarray, B: np.ndarray, mode: str) -> np.ndarray:
    """Combine two Gram matrices entrywise (hadamard/sum) or by kron product."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if mode in ("hadamard", "sum"):
        if A.shape != B.shape:
            raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
        return A * B if mode == "hadamard" else A + B
    if mode == "kronecker":
        return np.kron(A, B)
    raise ValueError(f"unknown composition mode {mode!r}")


def numerical_rank(G: np.ndarray, tol: float = 1e-8) -> int:
    """Count of singular values above tol times the largest one.

    Applied to the agent network-kernel matrix this is the heterogeneity of
    the agent population: 1 when all agents share a task, V when pairwise
    similarities carry no shared structure.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    G = np.asarray(G, dtype=float)
    if G.size == 0:
        raise ValueError("empty matrix")
    s = np.linalg.svd(G, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))
