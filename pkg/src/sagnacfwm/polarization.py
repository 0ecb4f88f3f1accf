"""Jones-calculus model of the pump polarization around the Sagnac loop.

The loop lies in the xz plane.  All birefringence sits in the fiber
polarization controller (FPC) with Jones matrix ``jc``; counter-clockwise light
sees its transpose.  The fiber geometry between the coupler and the FPC flips
the sign of the x component (``LOOP_GEOMETRY``).
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)
MATCH_TOL = 1e-10


class PolarizationError(ValueError):
    pass


class NonUnitaryWarning(UserWarning):
    """A lossy or otherwise non-unitary FPC matrix was supplied."""


@dataclass(frozen=True)
class JonesVector:
    ex: complex
    ey: complex

    @classmethod
    def from_array(cls, a) -> "JonesVector":
        a = np.asarray(a, dtype=complex)
        return cls(complex(a[0]), complex(a[1]))

    @classmethod
    def linear(cls, angle: float) -> "JonesVector":
        """Unit linear polarization at ``angle`` rad from x."""
        return cls(math.cos(angle) + 0j, math.sin(angle) + 0j)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.ex, self.ey], dtype=complex)

    def norm_sq(self) -> float:
        return abs(self.ex) ** 2 + abs(self.ey) ** 2

    def inner(self, other: "JonesVector") -> complex:
        """Hermitian inner product <self, other> (conjugate-linear in self)."""
        return self.ex.conjugate() * other.ex + self.ey.conjugate() * other.ey

    def __mul__(self, k) -> "JonesVector":
        return JonesVector(self.ex * k, self.ey * k)

    __rmul__ = __mul__

    def __add__(self, other: "JonesVector") -> "JonesVector":
        return JonesVector(self.ex + other.ex, self.ey + other.ey)

    def normalized(self) -> "JonesVector":
        n = math.sqrt(self.norm_sq())
        if n == 0:
            raise PolarizationError("zero Jones vector")
        return self * (1.0 / n)


@dataclass(frozen=True)
class JonesMatrix:
    jxx: complex
    jxy: complex
    jyx: complex
    jyy: complex

    @classmethod
    def from_array(cls, m) -> "JonesMatrix":
        m = np.asarray(m, dtype=complex)
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.jxx, self.jxy], [self.jyx, self.jyy]], dtype=complex)

    @property
    def T(self) -> "JonesMatrix":
        return JonesMatrix(self.jxx, self.jyx, self.jxy, self.jyy)

    def __matmul__(self, other):
        if isinstance(other, JonesMatrix):
            return JonesMatrix.from_array(self.array @ other.array)
        if isinstance(other, JonesVector):
            return JonesVector.from_array(self.array @ other.array)
        return NotImplemented

    def is_unitary(self, tol: float = 1e-12) -> bool:
        m = self.array
        return bool(np.max(np.abs(m.conj().T @ m - np.eye(2))) <= tol)

    def unitarity_residuals(self) -> tuple[float, float, float]:
        """Residuals of |Jxx|=|Jyy|, |Jxy|=|Jyx| and row orthogonality."""
        return (
            abs(abs(self.jxx) ** 2 - abs(self.jyy) ** 2),
            abs(abs(self.jxy) ** 2 - abs(self.jyx) ** 2),
            abs(self.jxx.conjugate() * self.jyx + self.jxy.conjugate() * self.jyy),
        )


IDENTITY = JonesMatrix(1, 0, 0, 1)
LOOP_GEOMETRY = JonesMatrix(-1, 0, 0, 1)
SWAP = JonesMatrix(0, 1, 1, 0)
# phi = pi/2 for x input and -pi/2 for y input: the 50/50 operating point
QUADRATURE_FPC = JonesMatrix(0, 1, 1j, 0)


@dataclass(frozen=True)
class HwpAngle:
    """Fast-axis orientation of the input half-wave plate, kept in [0, pi)."""

    theta: float

    def __post_init__(self):
        theta = float(self.theta) % math.pi
        object.__setattr__(self, "theta", 0.0 if theta >= math.pi else theta)

    @classmethod
    def degrees(cls, deg: float) -> "HwpAngle":
        return cls(math.radians(deg))


class MatchCondition(enum.Enum):
    REFLECTOR = "ReflectorMatch"
    TRANSMITTER = "TransmitterMatch"
    INPUT_MATCHED = "InputMatched"
    UNMATCHED = "Unmatched"


def _require_nonzero(e: JonesVector, what: str = "input") -> None:
    if e.norm_sq() == 0:
        raise PolarizationError(f"{what} Jones vector is zero")


def _check_unitary(jc: JonesMatrix) -> None:
    if not jc.is_unitary(1e-10):
        warnings.warn("FPC Jones matrix is not unitary; loop invariants do not hold", NonUnitaryWarning, stacklevel=3)


def split_at_coupler(e_in: JonesVector) -> tuple[JonesVector, JonesVector]:
    """Clockwise and counter-clockwise pumps; the cross-coupled one picks up ``i``."""
    _require_nonzero(e_in)
    return e_in * (1 / SQRT2), e_in * (1j / SQRT2)


def propagate_cw(ea_in: JonesVector, jc: JonesMatrix) -> JonesVector:
    _check_unitary(jc)
    return jc @ (LOOP_GEOMETRY @ ea_in)


def propagate_ccw(eb_in: JonesVector, jc: JonesMatrix) -> JonesVector:
    # reversed propagation through the FPC: transpose, not adjoint
    _check_unitary(jc)
    return LOOP_GEOMETRY @ (jc.T @ eb_in)


def recombine(ea: JonesVector, eb: JonesVector) -> tuple[JonesVector, JonesVector]:
    """Reflected (c) and transmitted (d) fields at the coupler."""
    ec = (ea * 1j + eb) * (1 / SQRT2)
    ed = (eb * 1j + ea) * (1 / SQRT2)
    return ec, ed


def loop_fields(jc: JonesMatrix, e_in: JonesVector) -> tuple[JonesVector, JonesVector]:
    """Both pumps back at the coupler, ``(ea, eb)``."""
    ea_in, eb_in = split_at_coupler(e_in)
    return propagate_cw(ea_in, jc), propagate_ccw(eb_in, jc)


def exit_fields(jc: JonesMatrix, e_in: JonesVector) -> tuple[JonesVector, JonesVector]:
    return recombine(*loop_fields(jc, e_in))


def transmission(jc: JonesMatrix) -> float:
    """Power fraction leaving the transmitted port; does not depend on the input."""
    return abs(0.5 * (jc.jxy + jc.jyx)) ** 2


def mode_match_defect(ea: JonesVector, eb: JonesVector) -> float:
    _require_nonzero(ea, "first")
    _require_nonzero(eb, "second")
    ov = abs(ea.inner(eb)) ** 2 / (ea.norm_sq() * eb.norm_sq())
    return float(min(max(1.0 - ov, 0.0), 1.0))


def check_match_conditions(jc: JonesMatrix, e_in: JonesVector, tol: float = MATCH_TOL) -> MatchCondition:
    """Which loop configuration makes the two pumps co-polarized at the coupler."""
    _require_nonzero(e_in)
    if abs(jc.jxy + jc.jyx) <= tol:
        return MatchCondition.REFLECTOR
    if abs(jc.jxx) <= tol and abs(jc.jyy) <= tol and abs(jc.jxy - jc.jyx) <= tol:
        return MatchCondition.TRANSMITTER
    e = e_in.normalized()
    lhs = jc.jxx * e.ex**2 - jc.jyy * e.ey**2
    rhs = (jc.jxy - jc.jyx) * e.ex * e.ey
    if abs(lhs - rhs) <= tol:
        return MatchCondition.INPUT_MATCHED
    return MatchCondition.UNMATCHED


def input_match_residual(jc: JonesMatrix, e_in: JonesVector) -> complex:
    """``Jxx Ex^2 - Jyy Ey^2 - (Jxy - Jyx) Ex Ey`` on the normalized input."""
    e = e_in.normalized()
    return jc.jxx * e.ex**2 - jc.jyy * e.ey**2 - (jc.jxy - jc.jyx) * e.ex * e.ey


def matched_inputs(jc: JonesMatrix) -> list[JonesVector]:
    """Input polarizations for which the pumps meet co-polarized (roots of the quadratic)."""
    a, b, c = jc.jxx, -(jc.jxy - jc.jyx), -jc.jyy
    out = []
    if abs(a) < 1e-14:
        # ey = 0 is a root: jxx ex^2 term vanishes
        out.append(JonesVector(1, 0))
        if abs(b) > 1e-14:
            out.append(JonesVector(-c / b, 1).normalized())
        return out
    for x in np.roots([a, b, c]):
        out.append(JonesVector(complex(x), 1).normalized())
    return out


def orthogonal_input(e_in: JonesVector) -> JonesVector:
    """``(Ey*, -Ex*)``, Hermitian-orthogonal to ``e_in``."""
    _require_nonzero(e_in)
    return JonesVector(e_in.ey.conjugate(), -e_in.ex.conjugate())


def bilinear_product(e1: JonesVector, e2: JonesVector) -> complex:
    """``e1 . e2`` without conjugation."""
    return e1.ex * e2.ex + e1.ey * e2.ey


def waveplate(retardance: float, angle: float) -> JonesMatrix:
    """Linear retarder with fast axis at ``angle``."""
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    core = np.diag([1.0, np.exp(1j * retardance)])
    return JonesMatrix.from_array(rot @ core @ rot.T)


def hwp_matrix(theta: HwpAngle | float, retardance_error: float = 0.0) -> JonesMatrix:
    """Half-wave plate; with zero error this is [[cos2t, sin2t], [sin2t, -cos2t]]."""
    t = theta.theta if isinstance(theta, HwpAngle) else float(theta)
    return waveplate(math.pi + retardance_error, t)


def retarder_stack(quarter1: float, half: float, quarter2: float) -> JonesMatrix:
    """Three-paddle controller: quarter, half, quarter wave plates at the given angles (rad)."""
    q1 = waveplate(math.pi / 2, quarter1)
    h = waveplate(math.pi, half)
    q2 = waveplate(math.pi / 2, quarter2)
    return q2 @ h @ q1


def symmetric_retarder(theta: float) -> JonesMatrix:
    return JonesMatrix(math.cos(theta), 1j * math.sin(theta), 1j * math.sin(theta), math.cos(theta))


def effective_purity(jc: JonesMatrix, e_in: JonesVector) -> float:
    """Coherent fraction of the pair state, from the pump overlap at the coupler.

    Pairs are co-polarized with their pump, so the two-photon polarization
    overlap is the squared one-photon overlap.
    """
    ea, eb = loop_fields(jc, e_in)
    return 1.0 - mode_match_defect(ea, eb)


def loop_phase(jc: JonesMatrix, e_in: JonesVector) -> float:
    """Relative pump phase ``phi`` at the coupler, coupler factor ``i`` removed.

    Defined so that the transmitted power fraction is ``sin^2(phi/2)`` when
    the pumps are matched: ``phi = 0`` is the loop mirror, ``pi/2`` the 50/50 point.
    """
    ea, eb = loop_fields(jc, e_in)
    ov = ea.inner(eb)
    if abs(ov) == 0:
        return float("nan")
    phi = float((np.angle(ov) - math.pi / 2) % (2 * math.pi))
    return 0.0 if phi >= 2 * math.pi else phi


def random_unitary(rng: np.random.Generator) -> JonesMatrix:
    """Haar-random 2x2 unitary."""
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / SQRT2
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return JonesMatrix.from_array(q * (d / np.abs(d)))


def random_jones(rng: np.random.Generator) -> JonesVector:
    z = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return JonesVector.from_array(z).normalized()
