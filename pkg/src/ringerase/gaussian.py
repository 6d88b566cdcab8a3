"""Single- and two-mode Gaussian states in the (X, P) quadrature picture.

Convention: [X, P] = i, so the vacuum covariance is diag(1/2, 1/2) and every
physical state satisfies det(cov) >= 1/4.  Joint states are ordered
(x_signal, p_signal, x_meter, p_meter).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

VACUUM_VAR = 0.5
PURITY_TOL = 1e-9


class Axis(str, enum.Enum):
    X = "X"
    P = "P"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuadratureState:
    """Single-mode Gaussian state: quadrature means and 2x2 covariance."""

    mean_x: float
    mean_p: float
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        cov = _frozen(self.cov)
        if cov.shape != (2, 2):
            raise ValueError(f"covariance must be 2x2, got shape {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        if cov[0, 0] <= 0 or cov[1, 1] <= 0 or np.linalg.det(cov) <= 0:
            raise ValueError("covariance must be positive definite")
        if np.linalg.det(cov) < 0.25 - PURITY_TOL:
            raise ValueError(f"covariance violates det(cov) >= 1/4: det = {np.linalg.det(cov)}")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean_x", float(self.mean_x))
        object.__setattr__(self, "mean_p", float(self.mean_p))

    @classmethod
    def from_variances(cls, var_x, var_p, mean_x=0.0, mean_p=0.0, cov_xp=0.0):
        return cls(mean_x, mean_p, [[var_x, cov_xp], [cov_xp, var_p]])

    @property
    def var_x(self) -> float:
        return float(self.cov[0, 0])

    @property
    def var_p(self) -> float:
        return float(self.cov[1, 1])

    @property
    def cov_xp(self) -> float:
        return float(self.cov[0, 1])

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_p])

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.cov))

    def is_physical(self, tol: float = PURITY_TOL) -> bool:
        return self.det >= 0.25 - tol

    def is_pure(self, tol: float = PURITY_TOL) -> bool:
        return abs(self.det - 0.25) <= tol

    def __eq__(self, other):
        if not isinstance(other, QuadratureState):
            return NotImplemented
        return (
            self.mean_x == other.mean_x
            and self.mean_p == other.mean_p
            and np.array_equal(self.cov, other.cov)
        )

    def __repr__(self):
        return (
            f"QuadratureState(mean=({self.mean_x:.6g}, {self.mean_p:.6g}), "
            f"var_x={self.var_x:.6g}, var_p={self.var_p:.6g}, cov_xp={self.cov_xp:.6g})"
        )


@dataclass(frozen=True, eq=False)
class JointState:
    """Signal + meter Gaussian state, ordered (x_s, p_s, x_m, p_m)."""

    means: np.ndarray
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        means = _frozen(self.means)
        cov = _frozen(self.cov)
        if means.shape != (4,) or cov.shape != (4, 4):
            raise ValueError("joint state needs 4 means and a 4x4 covariance")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "cov", cov)

    def signal(self) -> QuadratureState:
        return QuadratureState(self.means[0], self.means[1], self.cov[:2, :2])

    def meter(self) -> QuadratureState:
        return QuadratureState(self.means[2], self.means[3], self.cov[2:, 2:])


@dataclass(frozen=True)
class MeterSpec:
    """Squeezed-vacuum ancilla injected through the lossy mirror each cycle.

    ``anti_var`` defaults to the minimum-uncertainty value ``1/(4*squeezed_var)``;
    a larger value describes a mixed (thermalised) meter.
    """

    squeezed_axis: Axis = Axis.X
    squeezed_var: float = VACUUM_VAR
    anti_var: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "squeezed_axis", Axis(self.squeezed_axis))
        if not self.squeezed_var > 0:
            raise ValueError(f"squeezed_var must be positive, got {self.squeezed_var}")
        if self.anti_var is not None and self.anti_var * self.squeezed_var < 0.25 - PURITY_TOL:
            raise ValueError("anti_var violates the uncertainty relation")

    @property
    def anti_squeezed_var(self) -> float:
        if self.anti_var is None:
            return 1.0 / (4.0 * self.squeezed_var)
        return float(self.anti_var)


# -- state constructors -------------------------------------------------------

def make_vacuum() -> QuadratureState:
    return QuadratureState.from_variances(VACUUM_VAR, VACUUM_VAR)


def make_squeezed(spec: MeterSpec) -> QuadratureState:
    """Zero-mean squeezed vacuum described by ``spec``."""
    sq, anti = spec.squeezed_var, spec.anti_squeezed_var
    if spec.squeezed_axis is Axis.X:
        return QuadratureState.from_variances(sq, anti)
    return QuadratureState.from_variances(anti, sq)


# -- symplectic maps ----------------------------------------------------------

OMEGA_1 = np.array([[0.0, 1.0], [-1.0, 0.0]])
OMEGA_2 = np.kron(np.eye(2), OMEGA_1)


def gain_matrix(g: float) -> np.ndarray:
    """Single-mode squeezer X -> gX, P -> P/g."""
    if not g > 0:
        raise ValueError(f"squeezing gain must be positive, got {g}")
    return np.diag([g, 1.0 / g])


def mirror_matrix(R: float) -> np.ndarray:
    """4x4 map of the lossy mirror acting on (x_s, p_s, x_m, p_m).

    ``R`` is the amplitude reflectivity, ``T = sqrt(1 - R^2)``.
    """
    if not 0 < R <= 1:
        raise ValueError(f"reflectivity must lie in (0, 1], got {R}")
    T = math.sqrt(1.0 - R * R)
    return np.kron(np.array([[R, T], [T, -R]]), np.eye(2))


def displace(s: QuadratureState, dx: float, dp: float) -> QuadratureState:
    return QuadratureState(s.mean_x + dx, s.mean_p + dp, s.cov)


def squeeze_gain(s: QuadratureState, g: float) -> QuadratureState:
    S = gain_matrix(g)
    return QuadratureState(s.mean_x * g, s.mean_p / g, S @ s.cov @ S.T)


def amplify(s: QuadratureState, g: float) -> QuadratureState:
    """Phase-insensitive amplifier of amplitude gain ``g >= 1`` with a vacuum ancilla."""
    if not g >= 1:
        raise ValueError(f"amplifier gain must be >= 1, got {g}")
    noise = (g * g - 1.0) * VACUUM_VAR
    return QuadratureState(s.mean_x * g, s.mean_p * g, g * g * s.cov + noise * np.eye(2))


def mirror_mix(signal: QuadratureState, meter: QuadratureState, R: float) -> JointState:
    S = mirror_matrix(R)
    cov = np.zeros((4, 4))
    cov[:2, :2] = signal.cov
    cov[2:, 2:] = meter.cov
    mu = np.concatenate([signal.mean, meter.mean])
    out = S @ cov @ S.T
    return JointState(S @ mu, 0.5 * (out + out.T))


def homodyne_gain(j: JointState) -> tuple[np.ndarray, float]:
    """Regression vector of the signal on the meter P quadrature, and its variance."""
    var_m = float(j.cov[3, 3])
    if not var_m > 0:
        raise ValueError("meter P variance must be positive for homodyne conditioning")
    return j.cov[:2, 3] / var_m, var_m


def homodyne_p_meter(
    j: JointState,
    rng: np.random.Generator | None = None,
    outcome: float | None = None,
) -> tuple[float, QuadratureState]:
    """Measure the meter's P quadrature and condition the signal on the result.

    Exactly one of ``rng`` (sample the outcome from its Gaussian marginal) or
    ``outcome`` (use a fixed value) must be given.
    """
    if (rng is None) == (outcome is None):
        raise ValueError("give exactly one of rng or outcome")
    k, var_m = homodyne_gain(j)
    mu_m = j.means[3]
    if outcome is None:
        outcome = mu_m + math.sqrt(var_m) * rng.standard_normal()
    mean = j.means[:2] + k * (outcome - mu_m)
    c = j.cov[:2, 3]
    cov = j.cov[:2, :2] - np.outer(c, c) / var_m
    return float(outcome), QuadratureState(mean[0], mean[1], 0.5 * (cov + cov.T))



def mirror_homodyne_gain(
    signal: QuadratureState, meter: QuadratureState, R: float
) -> tuple[np.ndarray, float, np.ndarray]:
    """Mirror mix plus meter-P homodyne, conditioned in the pre-mirror frame.

    Returns the regression vector of the outgoing signal mean on the outcome,
    the outcome variance and the conditional signal covariance.  Same result
    as ``homodyne_p_meter(mirror_mix(...))`` but stable when the signal is
    squeezed far below the meter: the Joseph form keeps every variance a sum
    of non-negative terms instead of a difference of meter-sized ones.
    """
    M = mirror_matrix(R)
    h = M[3]
    B = np.zeros((4, 4))
    B[:2, :2] = signal.cov
    B[2:, 2:] = meter.cov
    var_m = float(h @ B @ h)
    if not var_m > 0:
        raise ValueError("meter P variance must be positive for homodyne conditioning")
    K = B @ h / var_m
    L = np.eye(4) - np.outer(K, h)
    post = M[:2] @ (L @ B @ L.T) @ M[:2].T
    return M[:2] @ K, var_m, 0.5 * (post + post.T)


def mirror_homodyne(
    signal: QuadratureState,
    meter: QuadratureState,
    R: float,
    rng: np.random.Generator | None = None,
    outcome: float | None = None,
) -> tuple[float, QuadratureState]:
    """Stable equivalent of ``homodyne_p_meter(mirror_mix(signal, meter, R), ...)``."""
    if (rng is None) == (outcome is None):
        raise ValueError("give exactly one of rng or outcome")
    k, var_m, cov = mirror_homodyne_gain(signal, meter, R)
    M = mirror_matrix(R)
    mu = np.concatenate([signal.mean, meter.mean])
    mu_m = float(M[3] @ mu)
    if outcome is None:
        outcome = mu_m + math.sqrt(var_m) * rng.standard_normal()
    mean = M[:2] @ mu + k * (outcome - mu_m)
    return float(outcome), QuadratureState(mean[0], mean[1], cov)

# -- figures of merit ---------------------------------------------------------

def overlap_fidelity(a: QuadratureState, b: QuadratureState) -> float:
    """Overlap Tr(rho_a rho_b) of two single-mode Gaussian states.

    For equal means and diagonal covariances this is
    ``[(vx_a + vx_b)(vp_a + vp_b)]^(-1/2)``.
    """
    s = a.cov + b.cov
    d = a.mean - b.mean
    quad = float(d @ np.linalg.solve(s, d))
    return float(min(1.0, math.exp(-0.5 * quad) / math.sqrt(np.linalg.det(s))))


def variance_to_dB(v: float) -> float:
    if not v > 0:
        raise ValueError(f"variance must be positive, got {v}")
    return 10.0 * math.log10(v / VACUUM_VAR)
