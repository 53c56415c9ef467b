"""Self-adjoint vertex conditions and conversions between their forms.

A condition at a vertex of degree ``d`` constrains the trace vectors
``F`` (edge-end values) and ``Fp`` (derivatives taken into the edges).
Three equivalent parameterizations are supported:

* ``GeneralAB``: ``A F + B Fp = 0`` with ``(A B)`` of full rank and
  ``A B^*`` Hermitian;
* ``UnitaryForm``: ``i(U - I) F + (U + I) Fp = 0`` with ``U`` unitary;
* ``ProjectorForm``: Dirichlet, Neumann and Robin parts given by mutually
  orthogonal projectors and a Hermitian operator on the Robin part.

The delta family (``Delta``, ``ExtendedDeltaAngle``, ``CirclePoint``) is
degree-agnostic and is expanded to matrices on demand.  Throughout, the
delta condition means continuity plus ``sum(Fp) = alpha * f(v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg as sla

from .errors import ConversionError, StructuralError

TAU_COND = 1e-9


class _Infinity:
    """The distinguished coupling value alpha = infinity (Dirichlet)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITY"

    def __str__(self) -> str:
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()

Alpha = Union[float, _Infinity]


def coerce_alpha(alpha) -> Alpha:
    """Return ``alpha`` as a finite float or the ``INFINITY`` tag."""
    if alpha is INFINITY:
        return INFINITY
    if isinstance(alpha, str) and alpha.strip().lower() in {"inf", "+inf", "infinity"}:
        return INFINITY
    value = float(alpha)
    if math.isinf(value) and value > 0:
        return INFINITY
    if not math.isfinite(value):
        raise ValueError(f"coupling constant must be real or +infinity, got {alpha!r}")
    return value


def is_infinite(alpha) -> bool:
    return alpha is INFINITY


# ---------------------------------------------------------------------------
# condition types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Delta:
    alpha: Alpha = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", coerce_alpha(self.alpha))

    dimension = None


@dataclass(frozen=True)
class ExtendedDeltaAngle:
    """``cos(gamma) sum(Fp) = sin(gamma) f(v)``, gamma taken modulo pi."""

    gamma: float

    def __post_init__(self):
        g = math.fmod(float(self.gamma), math.pi)
        if g < 0:
            g += math.pi
        object.__setattr__(self, "gamma", g)

    dimension = None


@dataclass(frozen=True)
class CirclePoint:
    """``(z + 1) sum(Fp) = i (z - 1) f(v)`` with ``z = exp(i theta)``."""

    theta: float

    def __post_init__(self):
        t = math.fmod(float(self.theta), 2.0 * math.pi)
        if t < 0:
            t += 2.0 * math.pi
        object.__setattr__(self, "theta", t)

    dimension = None

    @property
    def z(self) -> complex:
        return complex(math.cos(self.theta), math.sin(self.theta))


def _frozen(a, dtype=None) -> np.ndarray:
    arr = np.array(a, dtype=dtype if dtype is not None else np.result_type(a, float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise StructuralError("E_MATRIX_SHAPE", f"expected a square matrix, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GeneralAB:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _frozen(self.A)
        B = _frozen(self.B)
        if A.shape != B.shape:
            raise StructuralError("E_MATRIX_SHAPE", f"A {A.shape} and B {B.shape} differ in shape")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    @property
    def is_real(self) -> bool:
        return not (np.iscomplexobj(self.A) and np.any(self.A.imag)) and not (
            np.iscomplexobj(self.B) and np.any(self.B.imag)
        )


@dataclass(frozen=True, eq=False)
class UnitaryForm:
    U: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "U", _frozen(self.U, complex))

    @property
    def dimension(self) -> int:
        return self.U.shape[0]


@dataclass(frozen=True, eq=False)
class ProjectorForm:
    P_D: np.ndarray
    P_N: np.ndarray
    P_R: np.ndarray
    Lambda: np.ndarray
    ill_conditioned: bool = False
    gap: float = math.inf

    def __post_init__(self):
        for name in ("P_D", "P_N", "P_R", "Lambda"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def dimension(self) -> int:
        return self.P_D.shape[0]


VertexCondition = Union[Delta, ExtendedDeltaAngle, CirclePoint, GeneralAB, UnitaryForm, ProjectorForm]

DIRICHLET = Delta(INFINITY)
NEUMANN = Delta(0.0)


def is_delta_family(cond) -> bool:
    return isinstance(cond, (Delta, ExtendedDeltaAngle, CirclePoint))


def delta_parameter(cond) -> Alpha | None:
    """The coupling alpha of a delta-family condition, else ``None``.

    For ``CirclePoint`` the map is alpha(z) = i(z-1)/(z+1) = -tan(theta/2).
    """
    if isinstance(cond, Delta):
        return cond.alpha
    if isinstance(cond, ExtendedDeltaAngle):
        if abs(math.cos(cond.gamma)) < 1e-14:
            return INFINITY
        return math.tan(cond.gamma)
    if isinstance(cond, CirclePoint):
        if abs(math.cos(cond.theta / 2.0)) < 1e-14:
            return INFINITY
        return -math.tan(cond.theta / 2.0)
    return None


def alpha_of_theta(theta: float) -> Alpha:
    return delta_parameter(CirclePoint(theta))


def delta_angle(cond) -> float:
    """Angle gamma in [0, pi) such that the condition is cos(g) sum Fp = sin(g) f."""
    if isinstance(cond, ExtendedDeltaAngle):
        return cond.gamma
    if isinstance(cond, CirclePoint):
        return ExtendedDeltaAngle(-cond.theta / 2.0).gamma
    if isinstance(cond, Delta):
        if cond.alpha is INFINITY:
            return math.pi / 2.0
        return ExtendedDeltaAngle(math.atan(cond.alpha)).gamma
    raise TypeError(f"{type(cond).__name__} is not a delta-family condition")


def _continuity_rows(d: int) -> np.ndarray:
    rows = np.zeros((max(d - 1, 0), d))
    for i in range(d - 1):
        rows[i, i] = 1.0
        rows[i, i + 1] = -1.0
    return rows


def delta_to_ab(alpha, d: int) -> GeneralAB:
    """Continuity rows ``f_i - f_{i+1} = 0`` plus ``sum(Fp) - alpha f_1 = 0``.

    For alpha = infinity the last row is ``f_1 = 0`` and ``B = 0``.
    """
    if d < 1:
        raise StructuralError("E_DEGREE", "a vertex condition needs degree >= 1")
    alpha = coerce_alpha(alpha)
    A = np.zeros((d, d))
    B = np.zeros((d, d))
    A[: d - 1] = _continuity_rows(d)
    if alpha is INFINITY:
        A[d - 1, 0] = 1.0
    else:
        A[d - 1, 0] = -alpha
        B[d - 1, :] = 1.0
    return GeneralAB(A, B)


def _angle_to_ab(gamma: float, d: int) -> GeneralAB:
    A = np.zeros((d, d))
    B = np.zeros((d, d))
    A[: d - 1] = _continuity_rows(d)
    A[d - 1, 0] = -math.sin(gamma)
    B[d - 1, :] = math.cos(gamma)
    return GeneralAB(A, B)


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------


def as_ab(cond, d: int) -> GeneralAB:
    """Express any supported condition as a ``GeneralAB`` of dimension ``d``."""
    dim = getattr(cond, "dimension", None)
    if dim is not None and dim != d:
        raise StructuralError("E_DEGREE_MISMATCH", f"condition has dimension {dim}, vertex degree is {d}")
    if isinstance(cond, Delta):
        return delta_to_ab(cond.alpha, d)
    if isinstance(cond, ExtendedDeltaAngle):
        if delta_parameter(cond) is INFINITY:
            return delta_to_ab(INFINITY, d)
        return _angle_to_ab(cond.gamma, d)
    if isinstance(cond, CirclePoint):
        # (z+1) and i(z-1) share the phase exp(i theta/2); dividing it out
        # leaves cos(theta/2) sum Fp = -sin(theta/2) f.
        if delta_parameter(cond) is INFINITY:
            return delta_to_ab(INFINITY, d)
        return _angle_to_ab(delta_angle(cond), d)
    if isinstance(cond, GeneralAB):
        return cond
    if isinstance(cond, UnitaryForm):
        return unitary_to_ab(cond)
    if isinstance(cond, ProjectorForm):
        return projector_to_ab(cond)
    raise TypeError(f"unsupported vertex condition {cond!r}")


def orthonormal_rows(cond: GeneralAB) -> GeneralAB:
    """Equivalent ``(A, B)`` whose ``d x 2d`` matrix has orthonormal rows."""
    d = cond.dimension
    M = np.hstack([cond.A, cond.B])
    _, _, vh = np.linalg.svd(M)
    Q = vh[:d]
    if not np.iscomplexobj(M):
        Q = Q.real
    return GeneralAB(Q[:, :d], Q[:, d:])


def condition_subspace(cond, d: int) -> np.ndarray:
    """Orthonormal basis (2d x d) of the admissible pairs (F, Fp)."""
    ab = as_ab(cond, d)
    return sla.null_space(np.hstack([ab.A, ab.B]), rcond=TAU_COND)


def subspace_angle(X: np.ndarray, Y: np.ndarray) -> float:
    if X.shape[1] != Y.shape[1]:
        return math.pi / 2
    if X.shape[1] == 0:
        return 0.0
    return float(np.max(sla.subspace_angles(X, Y)))


def kernel_angle(c1, c2, d: int) -> float:
    """Largest principal angle between the admissible subspaces of two conditions."""
    return subspace_angle(condition_subspace(c1, d), condition_subspace(c2, d))


def unitary_to_ab(cond: UnitaryForm) -> GeneralAB:
    I = np.eye(cond.dimension)
    return GeneralAB(1j * (cond.U - I), cond.U + I)


def ab_to_unitary(cond: GeneralAB, *, check: bool = True) -> UnitaryForm:
    """Unitary ``U`` with ``i(U-I)F + (U+I)Fp = 0`` equivalent to ``AF + BFp = 0``.

    ``U = -(A - iB)^{-1}(A + iB)``; ``A - iB`` is invertible for any valid
    condition because ``(A - iB)(A - iB)^* = AA^* + BB^*``.
    """
    A = np.asarray(cond.A, dtype=complex)
    B = np.asarray(cond.B, dtype=complex)
    K = A - 1j * B
    sv = np.linalg.svd(K, compute_uv=False)
    if sv[-1] <= TAU_COND * max(sv[0], 1e-300):
        raise ConversionError(
            "E_INTERNAL_INCONSISTENCY",
            f"A - iB is numerically singular (sigma_min/sigma_max = {sv[-1] / sv[0]:.3e})",
        )
    U = -np.linalg.solve(K, A + 1j * B)
    out = UnitaryForm(U)
    if check:
        angle = kernel_angle(cond, out, cond.dimension)
        if angle > 1e-8:
            raise ConversionError("E_INTERNAL_INCONSISTENCY", f"unitary form rejects the condition subspace (angle {angle:.3e})")
    return out


def ab_to_projector(cond: GeneralAB, tau: float = TAU_COND) -> ProjectorForm:
    """Split a condition into Dirichlet, Neumann and Robin parts.

    ``P_D`` projects onto ``ker B``.  On its complement ``W`` the into-edge
    derivative is ``Fp_W = S F`` with ``S = -B^+ A`` Hermitian; the kernel
    of ``S`` is the Neumann part, the rest the Robin part with ``Lambda = S``.
    An eigenvalue of ``B`` or ``S`` within a factor ``1/sqrt(tau)`` of the
    cut marks the splitting as ill-conditioned; ``gap`` records the margin.
    """
    ab = orthonormal_rows(cond)
    d = ab.dimension
    A, B = ab.A, ab.B
    complex_ = np.iscomplexobj(A) or np.iscomplexobj(B)

    u, sb, vh = np.linalg.svd(B)
    keep = sb > tau
    gap = math.inf
    ill = False
    for s in sb:
        if tau < s < math.sqrt(tau) or 0 < s <= tau and s > tau * 1e-3:
            ill = True
        gap = min(gap, abs(math.log10(max(s, 1e-300) / tau)))
    W = vh[keep].conj().T  # orthonormal basis of ran B^*
    P_W = W @ W.conj().T
    P_D = np.eye(d) - P_W

    if W.shape[1] == 0:
        Z = np.zeros((d, d))
        return ProjectorForm(np.eye(d), Z, Z, Z, ill, gap)

    S_full = -np.linalg.pinv(B, rcond=tau) @ A
    S = W.conj().T @ S_full @ W
    S = 0.5 * (S + S.conj().T)
    evals, evecs = np.linalg.eigh(S)
    scale = max(1.0, float(np.max(np.abs(evals))))
    robin = np.abs(evals) > tau * scale
    for e in np.abs(evals):
        if tau * scale < e < math.sqrt(tau) * scale:
            ill = True
    V_R = W @ evecs[:, robin]
    V_N = W @ evecs[:, ~robin]
    P_R = V_R @ V_R.conj().T
    P_N = V_N @ V_N.conj().T
    Lam = V_R @ np.diag(evals[robin]) @ V_R.conj().T
    if not complex_:
        P_D, P_N, P_R, Lam = (np.real(M) for M in (P_D, P_N, P_R, Lam))
    return ProjectorForm(P_D, P_N, P_R, Lam, ill, gap)


def projector_to_ab(cond: ProjectorForm) -> GeneralAB:
    """``(P_D - Lambda P_R) F + (P_N + P_R) Fp = 0``."""
    return GeneralAB(cond.P_D - cond.Lambda @ cond.P_R, cond.P_N + cond.P_R)


def as_unitary(cond, d: int) -> UnitaryForm:
    if isinstance(cond, UnitaryForm):
        return cond
    return ab_to_unitary(as_ab(cond, d))


def as_projector(cond, d: int) -> ProjectorForm:
    if isinstance(cond, ProjectorForm):
        return cond
    return ab_to_projector(as_ab(cond, d))


def projector_accepts(cond: ProjectorForm, F, Fp, tol: float = 1e-9) -> bool:
    """Whether the trace pair satisfies all three parts of the projector form."""
    F = np.asarray(F)
    Fp = np.asarray(Fp)
    scale = max(1.0, float(np.linalg.norm(F)), float(np.linalg.norm(Fp)))
    r = (
        np.linalg.norm(cond.P_D @ F)
        + np.linalg.norm(cond.P_N @ Fp)
        + np.linalg.norm(cond.P_R @ Fp - cond.Lambda @ (cond.P_R @ F))
    )
    return bool(r <= tol * scale)


def ab_accepts(cond: GeneralAB, F, Fp, tol: float = 1e-9) -> bool:
    ab = orthonormal_rows(cond)
    F = np.asarray(F)
    Fp = np.asarray(Fp)
    scale = max(1.0, float(np.linalg.norm(F)), float(np.linalg.norm(Fp)))
    return bool(np.linalg.norm(ab.A @ F + ab.B @ Fp) <= tol * scale)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    dimension: int
    rank: int
    hermiticity_defect: float
    passed: bool
    unitarity_defect: float | None = None
    projector_defect: float | None = None
    messages: tuple[str, ...] = field(default_factory=tuple)


def validate_condition(cond, d: int, tau: float = TAU_COND) -> ValidationReport:
    """Check the maximal-rank and self-adjointness requirements.

    A dimension mismatch raises ``StructuralError``; a condition that fails
    the checks is reported, not raised.
    """
    dim = getattr(cond, "dimension", None)
    if dim is not None and dim != d:
        raise StructuralError("E_DEGREE_MISMATCH", f"condition has dimension {dim}, vertex degree is {d}")
    if d < 1:
        raise StructuralError("E_DEGREE", "a vertex condition needs degree >= 1")
    messages: list[str] = []
    unitarity = None
    projector_defect = None

    if isinstance(cond, UnitaryForm):
        U = cond.U
        unitarity = float(np.linalg.norm(U.conj().T @ U - np.eye(d), 2))
        if unitarity > tau:
            messages.append(f"U is not unitary (defect {unitarity:.3e})")
    if isinstance(cond, ProjectorForm):
        projector_defect = _projector_defect(cond)
        if projector_defect > tau:
            messages.append(f"projector form inconsistent (defect {projector_defect:.3e})")

    ab = as_ab(cond, d)
    M = np.hstack([ab.A, ab.B])
    sv = np.linalg.svd(M, compute_uv=False)
    smax = float(sv[0]) if sv.size else 0.0
    rank = int(np.sum(sv > tau * smax)) if smax > 0 else 0
    H = ab.A @ ab.B.conj().T
    defect = float(np.linalg.norm(H - H.conj().T, 2))
    rel_defect = defect / (smax * smax) if smax > 0 else math.inf
    if rank < d:
        messages.append(f"(A B) has rank {rank} < {d}")
    if rel_defect > tau:
        messages.append(f"A B^* is not self-adjoint (defect {defect:.3e})")
    passed = not messages
    return ValidationReport(d, rank, defect, passed, unitarity, projector_defect, tuple(messages))


def _projector_defect(cond: ProjectorForm) -> float:
    d = cond.dimension
    I = np.eye(d)
    defects = []
    for P in (cond.P_D, cond.P_N, cond.P_R):
        defects.append(np.linalg.norm(P @ P - P))
        defects.append(np.linalg.norm(P - P.conj().T))
    defects.append(np.linalg.norm(cond.P_D + cond.P_N + cond.P_R - I))
    defects.append(np.linalg.norm(cond.P_D @ cond.P_N))
    defects.append(np.linalg.norm(cond.P_D @ cond.P_R))
    defects.append(np.linalg.norm(cond.P_N @ cond.P_R))
    L = cond.Lambda
    defects.append(np.linalg.norm(L - L.conj().T))
    defects.append(np.linalg.norm(L - cond.P_R @ L @ cond.P_R))
    r = int(round(np.trace(cond.P_R).real))
    if r:
        ev = np.linalg.eigvalsh(0.5 * (L + L.conj().T))
        smallest = np.sort(np.abs(ev))[-r]
        if smallest <= TAU_COND * max(1.0, float(np.max(np.abs(ev)))):
            defects.append(1.0)
    return float(max(defects))


def random_valid_condition(rng: np.random.Generator, d: int, kind: str | None = None) -> GeneralAB:
    """A random self-adjoint condition, multiplied by a random invertible G.

    ``kind`` is ``"unitary"`` (generic, B invertible almost surely) or
    ``"projector"`` (random Dirichlet/Neumann/Robin split).
    """
    if kind is None:
        kind = "unitary" if rng.random() < 0.5 else "projector"
    if kind == "unitary":
        Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        Q, R = np.linalg.qr(Z)
        U = Q * (np.diag(R) / np.abs(np.diag(R)))
        ab = unitary_to_ab(UnitaryForm(U))
    else:
        Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        Q, _ = np.linalg.qr(Z)
        sizes = rng.multinomial(d, [1 / 3] * 3)
        nd, nn, nr = (int(s) for s in sizes)
        QD, QN, QR = Q[:, :nd], Q[:, nd : nd + nn], Q[:, nd + nn :]
        P_D = QD @ QD.conj().T
        P_N = QN @ QN.conj().T
        P_R = QR @ QR.conj().T
        lam = rng.uniform(0.3, 3.0, size=nr) * rng.choice([-1.0, 1.0], size=nr)
        Lam = QR @ np.diag(lam) @ QR.conj().T
        ab = GeneralAB(P_D - Lam, P_N + P_R)
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) + 2.0 * np.eye(d)
    return GeneralAB(G @ ab.A, G @ ab.B)
