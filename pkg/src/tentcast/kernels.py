"""Matern and RBF kernels and the additive-multiplicative hybrid composite.

Model inputs live in a fixed 9-column layout: columns 0:2 are projected
spatial coordinates in miles, column 2 is the day index, columns 3:9 are the
standardized covariates. The hybrid kernel is

    k = k_s + k_t + k_x + k_s * k_t * k_x

with Matern space/time components and an ARD RBF covariate component.
Gradient helpers differentiate with respect to log-variance and
log-lengthscales, the parameterization used by the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .linalg import stable_cholesky

SPATIAL_SLICE = slice(0, 2)
TEMPORAL_SLICE = slice(2, 3)
COVARIATE_SLICE = slice(3, 9)
INPUT_DIM = 9

MATERN_ORDERS = ("half", "three_half", "five_half")

SQRT3 = math.sqrt(3.0)
SQRT5 = math.sqrt(5.0)


@dataclass
class KernelParams:
    """Output variance and one positive lengthscale per input dimension."""

    variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise InputError(f"variance must be positive and finite, got {self.variance}")
        if not np.all(np.isfinite(self.lengthscales) & (self.lengthscales > 0)):
            raise InputError(f"lengthscales must be positive and finite, got {self.lengthscales}")

    @property
    def n_dims(self) -> int:
        return self.lengthscales.size


def _matern_shape(r, order):
    """Unit-variance Matern profile g(r) and its radial derivative dg/dr."""
    if order == "half":
        g = np.exp(-r)
        return g, -g
    if order == "three_half":
        e = np.exp(-SQRT3 * r)
        return (1.0 + SQRT3 * r) * e, -3.0 * r * e
    if order == "five_half":
        e = np.exp(-SQRT5 * r)
        g = (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * e
        return g, -(5.0 / 3.0) * r * (1.0 + SQRT5 * r) * e
    raise InputError(f"unsupported Matern order {order!r}; expected one of {MATERN_ORDERS}")


def matern(r, p: KernelParams, order: str = "three_half"):
    """Matern covariance at distance ``r`` (scaled by the single lengthscale)."""
    if p.n_dims != 1:
        raise InputError("distance-based matern() needs a single lengthscale; use Matern for ARD")
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise InputError("non-finite distance input")
    g, _ = _matern_shape(np.abs(r) / p.lengthscales[0], order)
    return p.variance * g


def rbf(delta, p: KernelParams):
    """RBF covariance for per-dimension differences ``delta`` (last axis = dims)."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if not np.all(np.isfinite(delta)):
        raise InputError("non-finite difference input")
    if delta.shape[-1] != p.n_dims:
        if p.n_dims == 1:
            delta = delta[..., None]
        else:
            raise InputError(f"expected {p.n_dims} difference components, got {delta.shape[-1]}")
    s2 = np.sum((delta / p.lengthscales) ** 2, axis=-1)
    return p.variance * np.exp(-0.5 * s2)


class Matern:
    """Batched ARD Matern kernel over one slice of the model input columns."""

    def __init__(self, params: KernelParams, order: str = "three_half"):
        if order not in MATERN_ORDERS:
            raise InputError(f"unsupported Matern order {order!r}")
        self.params = params
        self.order = order

    @property
    def n_log_params(self) -> int:
        return 1 + self.params.n_dims

    def _scaled_r(self, A, B):
        ls = self.params.lengthscales
        r2 = np.zeros((A.shape[0], B.shape[0]))
        for d in range(ls.size):
            diff = (A[:, d, None] - B[None, :, d]) / ls[d]
            r2 += diff * diff
        return np.sqrt(np.maximum(r2, 0.0))

    def cross(self, A, B):
        g, _ = _matern_shape(self._scaled_r(A, B), self.order)
        return self.params.variance * g

    def cross_with_grads(self, A, B):
        """Kernel matrix and gradients w.r.t. [log variance, log lengthscale_d...]."""
        ls = self.params.lengthscales
        r = self._scaled_r(A, B)
        g, dg = _matern_shape(r, self.order)
        K = self.params.variance * g
        grads = [K]
        # dK/d log l_d = -variance * dg/dr * sd^2 / r with sd = diff_d / l_d;
        # the half-order profile needs the explicit r guard at r == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            radial = np.where(r > 0.0, -self.params.variance * dg / r, 0.0)
        for d in range(ls.size):
            diff = (A[:, d, None] - B[None, :, d]) / ls[d]
            grads.append(radial * diff * diff)
        return K, grads


class RBF:
    """Batched ARD RBF kernel."""

    def __init__(self, params: KernelParams):
        self.params = params

    @property
    def n_log_params(self) -> int:
        return 1 + self.params.n_dims

    def _scaled_sq(self, A, B):
        ls = self.params.lengthscales
        s2 = np.zeros((A.shape[0], B.shape[0]))
        for d in range(ls.size):
            diff = (A[:, d, None] - B[None, :, d]) / ls[d]
            s2 += diff * diff
        return s2

    def cross(self, A, B):
        return self.params.variance * np.exp(-0.5 * self._scaled_sq(A, B))

    def cross_with_grads(self, A, B):
        ls = self.params.lengthscales
        K = self.cross(A, B)
        grads = [K]
        for d in range(ls.size):
            diff = (A[:, d, None] - B[None, :, d]) / ls[d]
            grads.append(K * diff * diff)
        return K, grads


@dataclass
class HybridKernel:
    """Additive-multiplicative composite of spatial, temporal, covariate kernels."""

    spatial: KernelParams
    temporal: KernelParams
    covariate: KernelParams
    matern_order: str = "three_half"

    _ks: Matern = field(init=False, repr=False)
    _kt: Matern = field(init=False, repr=False)
    _kx: RBF = field(init=False, repr=False)

    def __post_init__(self):
        if self.spatial.n_dims != 2:
            raise InputError("spatial kernel needs 2 lengthscales")
        if self.temporal.n_dims != 1:
            raise InputError("temporal kernel needs 1 lengthscale")
        if self.covariate.n_dims != 6:
            raise InputError("covariate kernel needs 6 lengthscales")
        self._rebuild()

    def _rebuild(self):
        self._ks = Matern(self.spatial, self.matern_order)
        self._kt = Matern(self.temporal, self.matern_order)
        self._kx = RBF(self.covariate)

    # --- log-parameter vector interface (optimizer-facing) ----------------
    # order: [s_var, s_l0, s_l1, t_var, t_l0, x_var, x_l0..x_l5]

    @property
    def n_log_params(self) -> int:
        return 12

    def log_params(self) -> np.ndarray:
        return np.log(
            np.concatenate(
                [
                    [self.spatial.variance],
                    self.spatial.lengthscales,
                    [self.temporal.variance],
                    self.temporal.lengthscales,
                    [self.covariate.variance],
                    self.covariate.lengthscales,
                ]
            )
        )

    def set_log_params(self, vec):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (12,):
            raise InputError(f"expected 12 log-parameters, got shape {vec.shape}")
        p = np.exp(vec)
        self.spatial = KernelParams(p[0], p[1:3])
        self.temporal = KernelParams(p[3], p[4:5])
        self.covariate = KernelParams(p[5], p[6:12])
        self._rebuild()

    # --- evaluation --------------------------------------------------------

    def _split(self, P):
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[1] != INPUT_DIM:
            raise InputError(f"expected (n, {INPUT_DIM}) inputs, got {P.shape}")
        return P[:, SPATIAL_SLICE], P[:, TEMPORAL_SLICE], P[:, COVARIATE_SLICE]

    def cross(self, A, B) -> np.ndarray:
        As, At, Ax = self._split(A)
        Bs, Bt, Bx = self._split(B)
        Ks = self._ks.cross(As, Bs)
        Kt = self._kt.cross(At, Bt)
        Kx = self._kx.cross(Ax, Bx)
        return Ks + Kt + Kx + Ks * Kt * Kx

    def cross_with_grads(self, A, B):
        """K and a (12, n, m) stack of dK/d(log parameter)."""
        As, At, Ax = self._split(A)
        Bs, Bt, Bx = self._split(B)
        Ks, Gs = self._ks.cross_with_grads(As, Bs)
        Kt, Gt = self._kt.cross_with_grads(At, Bt)
        Kx, Gx = self._kx.cross_with_grads(Ax, Bx)
        K = Ks + Kt + Kx + Ks * Kt * Kx
        grads = np.empty((12,) + K.shape)
        ts = Kt * Kx
        for j, G in enumerate(Gs):
            grads[j] = G * (1.0 + ts)
        sx = Ks * Kx
        for j, G in enumerate(Gt):
            grads[3 + j] = G * (1.0 + sx)
        st = Ks * Kt
        for j, G in enumerate(Gx):
            grads[5 + j] = G * (1.0 + st)
        return K, grads

    def diag_value(self) -> float:
        """k(x, x), identical for all inputs (stationary components)."""
        vs, vt, vx = self.spatial.variance, self.temporal.variance, self.covariate.variance
        return vs + vt + vx + vs * vt * vx

    def diag_value_grads(self) -> np.ndarray:
        """d k(x,x) / d(log parameter), aligned with :meth:`log_params`."""
        vs, vt, vx = self.spatial.variance, self.temporal.variance, self.covariate.variance
        g = np.zeros(12)
        g[0] = vs * (1.0 + vt * vx)
        g[3] = vt * (1.0 + vs * vx)
        g[5] = vx * (1.0 + vs * vt)
        return g

    def to_dict(self) -> dict:
        return {
            "matern_order": self.matern_order,
            "spatial": {"variance": self.spatial.variance,
                        "lengthscales": self.spatial.lengthscales.tolist()},
            "temporal": {"variance": self.temporal.variance,
                         "lengthscales": self.temporal.lengthscales.tolist()},
            "covariate": {"variance": self.covariate.variance,
                          "lengthscales": self.covariate.lengthscales.tolist()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HybridKernel":
        return cls(
            spatial=KernelParams(d["spatial"]["variance"], d["spatial"]["lengthscales"]),
            temporal=KernelParams(d["temporal"]["variance"], d["temporal"]["lengthscales"]),
            covariate=KernelParams(d["covariate"]["variance"], d["covariate"]["lengthscales"]),
            matern_order=d["matern_order"],
        )


def hybrid_eval(h: HybridKernel, a, b) -> float:
    """Covariance between two single inputs in the 9-column layout."""
    a = np.asarray(a, dtype=float).reshape(1, INPUT_DIM)
    b = np.asarray(b, dtype=float).reshape(1, INPUT_DIM)
    return float(h.cross(a, b)[0, 0])


def gram(points, kernel, jitter: float = 1e-8) -> np.ndarray:
    """Symmetric Gram matrix with jitter on the diagonal, Cholesky-checked.

    ``kernel`` is anything with a ``cross(A, B)`` method. Jitter escalates
    internally up to 1e-4 times the largest diagonal entry; failure past
    that raises :class:`NumericalError`.
    """
    if jitter < 0:
        raise InputError("jitter must be non-negative")
    P = np.asarray(points, dtype=float)
    K = kernel.cross(P, P)
    K = 0.5 * (K + K.T)
    _, used = stable_cholesky(K, jitter=jitter)
    return K + used * np.eye(K.shape[0])
