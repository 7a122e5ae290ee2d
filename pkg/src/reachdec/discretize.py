"""Conversion of continuous-time linear systems into set-based recurrences.

A system x'(t) = A x(t) + B u(t), with initial states X0 and inputs U,
becomes the discrete recurrence X(k+1) = Phi X(k) + V(k) with
Phi = exp(A delta).  Two variants are provided:

* dense time: X(0) and V(k) are bloated so that X(k) covers the whole
  time interval [k delta, (k+1) delta];
* discrete time: no bloating, X(k) covers the time points k delta only,
  with the input integrated through the first exponential integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InputError
from .linalg import BlockMatrix, discretization_matrices, exp_matrix
from .sets import (
    ConvexHullPair,
    Hyperrectangle,
    LazySet,
    LinearMap,
    MinkowskiSum,
    Scaled,
    Singleton,
    minkowski_sum_all,
    symmetric_interval_hull,
    zero_set,
)

__all__ = [
    "ContinuousSystem",
    "DiscreteSystem",
    "DENSE",
    "DISCRETE",
    "discretize",
    "discretize_dense",
    "discretize_discrete",
]

DENSE = "dense"
DISCRETE = "discrete"


def is_zero_set(X):
    if isinstance(X, Singleton):
        return not np.any(X.point)
    if isinstance(X, Hyperrectangle):
        return not (np.any(X.center) or np.any(X.radius))
    return False


def _check_input_sets(U, m, what):
    if U is None:
        return None
    if isinstance(U, LazySet):
        if U.dim != m:
            raise DimensionError(f"{what}: input set has dimension {U.dim}, "
                                 f"expected {m}", module="discretize")
        return U
    U = list(U)
    if not U:
        raise InputError(f"{what}: empty input sequence", module="discretize")
    for k, Uk in enumerate(U):
        if Uk.dim != m:
            raise DimensionError(f"{what}: input set {k} has dimension {Uk.dim}, "
                                 f"expected {m}", module="discretize")
    return U


@dataclass
class ContinuousSystem:
    """x'(t) = A x(t) + B u(t), x(0) in X0, u(t) in U.

    ``U`` may be a single set (held constant over the horizon), a list of
    sets (one per upcoming step, piecewise constant), or None for no input.
    ``B`` defaults to the identity, in which case inputs live in the state
    space.
    """

    A: BlockMatrix
    X0: LazySet
    B: BlockMatrix | None = None
    U: object = None

    def __post_init__(self):
        if not isinstance(self.A, BlockMatrix):
            self.A = BlockMatrix(self.A)
        n = self.A.n
        if self.B is not None and not isinstance(self.B, BlockMatrix):
            self.B = BlockMatrix(self.B)
        if self.B is not None and self.B.shape[0] != n:
            raise DimensionError(f"ContinuousSystem: B has {self.B.shape[0]} rows, "
                                 f"A is {n}x{n}", module="discretize")
        if self.X0.dim != n:
            raise DimensionError(f"ContinuousSystem: X0 has dimension {self.X0.dim}, "
                                 f"A is {n}x{n}", module="discretize")
        self.U = _check_input_sets(self.U, self.input_dim, "ContinuousSystem")

    @property
    def n(self):
        return self.A.n

    @property
    def input_dim(self):
        return self.B.shape[1] if self.B is not None else self.n


@dataclass
class DiscreteSystem:
    """Set-based recurrence X(k+1) = Phi X(k) + V(k).

    ``V`` is a single set (constant input) or a list of per-step sets.
    ``u_sets`` optionally retains the original (pre-discretization) input
    sets for output feedthrough checks.
    """

    phi: BlockMatrix
    x_init: LazySet
    v: object
    delta: float
    model: str = DISCRETE
    u_sets: object = field(default=None, repr=False)

    def __post_init__(self):
        if not isinstance(self.phi, BlockMatrix):
            self.phi = BlockMatrix(self.phi)
        n = self.phi.n
        if self.x_init.dim != n:
            raise DimensionError(f"DiscreteSystem: X(0) has dimension "
                                 f"{self.x_init.dim}, Phi is {n}x{n}",
                                 module="discretize")
        if self.v is None:
            self.v = zero_set(n)
        vs = self.v if isinstance(self.v, LazySet) else list(self.v)
        if isinstance(vs, LazySet):
            if vs.dim != n:
                raise DimensionError(f"DiscreteSystem: V has dimension {vs.dim}, "
                                     f"expected {n}", module="discretize")
        else:
            for k, Vk in enumerate(vs):
                if Vk.dim != n:
                    raise DimensionError(f"DiscreteSystem: V({k}) has dimension "
                                         f"{Vk.dim}, expected {n}", module="discretize")
            self.v = vs
        if self.model not in (DENSE, DISCRETE):
            raise InputError(f"DiscreteSystem: unknown model {self.model!r}",
                             module="discretize")

    @property
    def n(self):
        return self.phi.n

    @property
    def constant_input(self):
        return isinstance(self.v, LazySet)

    def v_at(self, k):
        if self.constant_input:
            return self.v
        if k >= len(self.v):
            raise InputError(f"DiscreteSystem: input sequence has {len(self.v)} "
                             f"entries, step {k} requested", module="discretize")
        return self.v[k]


def _mapped_input(sys, k):
    """Input set at step k, mapped into the state space through B."""
    if sys.U is None:
        return None
    if isinstance(sys.U, LazySet):
        Uk = sys.U
    else:
        if k >= len(sys.U):
            raise InputError(f"input sequence has {len(sys.U)} entries, "
                             f"step {k} requested", module="discretize")
        Uk = sys.U[k]
    if sys.B is None:
        return Uk
    return LinearMap(sys.B.data, Uk)


def _input_count(sys):
    return None if (sys.U is None or isinstance(sys.U, LazySet)) else len(sys.U)


def _bloat_from(phi2_abs, mapped):
    """Symmetric box [phi2(|A|) applied to the interval hull of ``mapped``]."""
    inner = symmetric_interval_hull(mapped)
    return symmetric_interval_hull(LinearMap(phi2_abs.data, inner))


def discretize_dense(sys: ContinuousSystem, delta):
    """Dense-time model: step k of the recurrence covers t in [k d, (k+1) d].

    The first step set is the convex hull of X0 with its image bloated by
    the input effect and the second-order curvature of the flow; each
    input set is bloated the same way.
    """
    phi = exp_matrix(sys.A, delta)
    _, _, phi2_abs = discretization_matrices(sys.A.abs(), delta)
    A2 = sys.A @ sys.A
    n = sys.n

    eplus = _bloat_from(phi2_abs, LinearMap(A2.data, sys.X0))

    def v_for(k):
        mapped = _mapped_input(sys, k)
        if mapped is None or is_zero_set(mapped):
            return zero_set(n)
        epsi = _bloat_from(phi2_abs, LinearMap(sys.A.data, mapped))
        return MinkowskiSum(Scaled(delta, mapped), epsi)

    first_terms = [LinearMap(phi.data, sys.X0)]
    mapped0 = _mapped_input(sys, 0)
    if mapped0 is not None and not is_zero_set(mapped0):
        first_terms.append(Scaled(delta, mapped0))
        first_terms.append(_bloat_from(phi2_abs, LinearMap(sys.A.data, mapped0)))
    first_terms.append(eplus)
    x_init = ConvexHullPair(sys.X0, minkowski_sum_all(first_terms))

    count = _input_count(sys)
    if count is None:
        v = v_for(0) if sys.U is not None else zero_set(n)
    else:
        v = [v_for(k) for k in range(count)]
    return DiscreteSystem(phi, x_init, v, float(delta), model=DENSE,
                          u_sets=sys.U)


def discretize_discrete(sys: ContinuousSystem, delta):
    """Discrete-time model: step k covers the time point k d only.

    X(0) is X0 unchanged and inputs act through the first exponential
    integral: V(k) = Phi1(A, d) B U(k).
    """
    n = sys.n
    if sys.U is None:
        phi = exp_matrix(sys.A, delta)
        return DiscreteSystem(phi, sys.X0, zero_set(n), float(delta),
                              model=DISCRETE, u_sets=None)
    phi, phi1, _ = discretization_matrices(sys.A, delta)

    def v_for(k):
        mapped = _mapped_input(sys, k)
        if is_zero_set(mapped):
            return zero_set(n)
        return LinearMap(phi1.data, mapped)

    count = _input_count(sys)
    v = v_for(0) if count is None else [v_for(k) for k in range(count)]
    return DiscreteSystem(phi, sys.X0, v, float(delta), model=DISCRETE,
                          u_sets=sys.U)


def discretize(sys: ContinuousSystem, delta, model=DENSE):
    """Dispatch to the dense- or discrete-time transformation."""
    if not (np.isfinite(delta) and delta > 0):
        raise InputError(f"discretize: step must be positive, got {delta}",
                         module="discretize")
    if model == DENSE:
        return discretize_dense(sys, delta)
    if model == DISCRETE:
        return discretize_discrete(sys, delta)
    raise InputError(f"discretize: unknown model {model!r}", module="discretize")
