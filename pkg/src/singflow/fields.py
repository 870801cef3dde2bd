"""Built-in vector fields with analytic Jacobians.

Three field families are supported, all on a Euclidean chart:

* ``linear_saddle`` -- diag(lambda_u, -lambda_s) with per-axis rates,
  unstable axes first;
* ``lorenz`` -- the classic Lorenz system (sigma, rho, b);
* ``perturbed_linear`` -- A x + amp * g(x) where g_i(x) = x_{i+1 mod d}^2,
  a fixed quadratic perturbation that vanishes to first order at the origin
  (so the origin stays an equilibrium with an unchanged linearisation).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

KIND_LINEAR = 0
KIND_LORENZ = 1

_KIND_IDS = {"linear_saddle": KIND_LINEAR, "perturbed_linear": KIND_LINEAR,
             "lorenz": KIND_LORENZ}


@dataclass(frozen=True)
class FieldSpec:
    """A C^1 vector field on a Euclidean chart with known singularity seeds.

    ``params`` is kind-specific and immutable: for the linear kinds it is
    ``(A_rows, amp)`` with ``A_rows`` a tuple of row tuples, for Lorenz it
    is ``(sigma, rho, b)``.  ``integ_tol`` is the relative local truncation
    tolerance of the adaptive integrator; ``atol`` is kept near the float
    floor so deep passages by a singularity are tracked relatively.
    """

    dim: int
    kind: str
    params: tuple
    seeds: tuple
    integ_tol: float = 1e-10
    atol: float = 1e-300
    max_step: float = 0.25
    chart_bound: float = 1e8
    time_sign: float = 1.0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not self.integ_tol > 0:
            raise ValueError("integ_tol must be > 0")
        if not self.max_step > 0:
            raise ValueError("max_step must be > 0")
        if self.kind not in _KIND_IDS:
            raise ValueError(f"unknown field kind {self.kind!r}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def linear_saddle(lambda_u=1.0, lambda_s=1.0, **kw) -> "FieldSpec":
        """Saddle with expansion rates lambda_u and contraction rates lambda_s.

        Scalars give one axis each; sequences give one axis per entry.
        Unstable axes come first in the chart coordinates.
        """
        lu = np.atleast_1d(np.asarray(lambda_u, dtype=float))
        ls = np.atleast_1d(np.asarray(lambda_s, dtype=float))
        if np.any(lu <= 0) or np.any(ls <= 0):
            raise ValueError("saddle rates must be positive")
        rates = np.concatenate([lu, -ls])
        a = np.diag(rates)
        d = a.shape[0]
        return FieldSpec(dim=d, kind="linear_saddle",
                         params=(_rows(a), 0.0), seeds=((0.0,) * d,), **kw)

    @staticmethod
    def lorenz(sigma=10.0, rho=28.0, b=8.0 / 3.0, **kw) -> "FieldSpec":
        c = float(np.sqrt(b * (rho - 1.0))) if rho > 1 else 0.0
        seeds = ((0.0, 0.0, 0.0), (c, c, rho - 1.0), (-c, -c, rho - 1.0))
        kw.setdefault("chart_bound", 1e4)
        return FieldSpec(dim=3, kind="lorenz",
                         params=(float(sigma), float(rho), float(b)),
                         seeds=seeds, **kw)

    @staticmethod
    def perturbed_linear(a, amp=0.0, **kw) -> "FieldSpec":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("A must be a square matrix")
        d = a.shape[0]
        return FieldSpec(dim=d, kind="perturbed_linear",
                         params=(_rows(a), float(amp)), seeds=((0.0,) * d,), **kw)

    # -- evaluation --------------------------------------------------------

    @property
    def kind_id(self) -> int:
        return _KIND_IDS[self.kind]

    def par_array(self) -> np.ndarray:
        """Flat parameter vector consumed by the compiled integrator core.

        Layout: ``[time_sign, kind params...]`` -- for linear kinds
        ``[ts, amp, A row-major]``, for Lorenz ``[ts, sigma, rho, b]``.
        """
        if self.kind_id == KIND_LINEAR:
            rows, amp = self.params
            a = np.asarray(rows, dtype=float).ravel()
            return np.concatenate([[self.time_sign, amp], a])
        sg, rh, bb = self.params
        return np.array([self.time_sign, sg, rh, bb], dtype=float)

    def matrix(self) -> np.ndarray:
        """Linear part A (the Jacobian at the origin for linear kinds)."""
        if self.kind_id != KIND_LINEAR:
            raise ValueError("matrix() only defined for linear kinds")
        return np.asarray(self.params[0], dtype=float)

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind_id == KIND_LINEAR:
            a = self.matrix()
            amp = self.params[1]
            out = x @ a.T
            if amp != 0.0:
                out = out + amp * np.roll(x, -1, axis=-1) ** 2
        else:
            sg, rh, bb = self.params
            out = np.stack([sg * (x[..., 1] - x[..., 0]),
                            x[..., 0] * (rh - x[..., 2]) - x[..., 1],
                            x[..., 0] * x[..., 1] - bb * x[..., 2]], axis=-1)
        return self.time_sign * out

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind_id == KIND_LINEAR:
            j = self.matrix().copy()
            amp = self.params[1]
            if amp != 0.0:
                d = self.dim
                for i in range(d):
                    j[i, (i + 1) % d] += 2.0 * amp * x[(i + 1) % d]
        else:
            sg, rh, bb = self.params
            j = np.array([[-sg, sg, 0.0],
                          [rh - x[2], -1.0, -x[0]],
                          [x[1], x[0], -bb]])
        return self.time_sign * j

    def reversed(self) -> "FieldSpec":
        """The time-reversed field -X (same chart, same seeds)."""
        return replace(self, time_sign=-self.time_sign)


def _rows(a: np.ndarray) -> tuple:
    return tuple(tuple(float(v) for v in row) for row in a)


def eval_field(spec: FieldSpec, x) -> np.ndarray:
    """Evaluate X(x)."""
    return spec.eval(x)
