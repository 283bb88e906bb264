"""Discrete-time LTI state-space algebra.

Everything else in the package is built on the operations here:
zero-order-hold discretization, series interconnection, state-space
inversion, Schur stability tests, discrete Lyapunov certificates and
the H-infinity norm.  All operations are pure functions; models are
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_discrete_lyapunov

__all__ = [
    "StateSpaceModel",
    "LyapunovCertificate",
    "InversionError",
    "zoh_discretize",
    "series",
    "inverse_realization",
    "spectral_radius",
    "is_schur",
    "lyapunov_certificate",
    "simulate_lti",
    "hinf_norm",
]

#: Reject feedthrough inversion above this condition number; the inverse
#: realization amplifies D^-1 errors into every downstream matrix.
COND_CAP = 1e8

#: Default margin on the strict spectral-radius inequality rho(A) < 1.
SCHUR_TOL = 1e-9


class InversionError(ValueError):
    """Raised when a realization has no usable state-space inverse."""


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {M.shape}")
    return M


class StateSpaceModel:
    """A discrete-time LTI realization x+ = Ax + Bu, y = Cx + Du.

    Dimensions are validated on construction and the matrices are frozen
    (read-only views).  Zero-state systems (n = 0, static gains) are
    supported.
    """

    __slots__ = ("A", "B", "C", "D")

    def __init__(self, A, B, C, D):
        A = _as_matrix(A, "A")
        B = _as_matrix(B, "B")
        C = _as_matrix(C, "C")
        D = _as_matrix(D, "D")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(
                f"D is {D.shape}, expected {(C.shape[0], B.shape[1])}"
            )
        for name, M in (("A", A), ("B", B), ("C", C), ("D", D)):
            if M.size and not np.all(np.isfinite(M)):
                raise ValueError(f"{name} contains non-finite entries")
        for M in (A, B, C, D):
            M.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    def __setattr__(self, name, value):
        raise AttributeError("StateSpaceModel is immutable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def transfer(self, z: complex) -> np.ndarray:
        """Evaluate the transfer function C (zI - A)^-1 B + D at z."""
        if self.n == 0:
            return self.D.astype(complex)
        M = np.linalg.solve(z * np.eye(self.n) - self.A, self.B)
        return self.C @ M + self.D

    def __repr__(self):
        return f"StateSpaceModel(n={self.n}, m={self.m}, p={self.p})"


@dataclass(frozen=True)
class LyapunovCertificate:
    """Stability certificate: Z > 0 with A' Z A - Z < 0.

    ``margin`` is the smallest eigenvalue of Z - A' Z A.
    """

    Z: np.ndarray
    margin: float


def zoh_discretize(Ac, Bc, Ts: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of a continuous-time (Ac, Bc) pair.

    Uses the augmented-matrix exponential
    expm([[Ac, Bc], [0, 0]] * Ts) = [[Ad, Bd], [0, I]],
    so Ad = exp(Ac Ts) and Bd = (int_0^Ts exp(Ac s) ds) Bc.
    """
    Ac = _as_matrix(Ac, "Ac")
    Bc = _as_matrix(Bc, "Bc")
    if Ts <= 0:
        raise ValueError(f"sampling time must be positive, got {Ts}")
    n = Ac.shape[0]
    if Ac.shape != (n, n):
        raise ValueError(f"Ac must be square, got {Ac.shape}")
    if Bc.shape[0] != n:
        raise ValueError(f"Bc has {Bc.shape[0]} rows, expected {n}")
    if not (np.all(np.isfinite(Ac)) and np.all(np.isfinite(Bc))):
        raise ValueError("non-finite entries in continuous-time matrices")
    m = Bc.shape[1]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = Ac
    M[:n, n:] = Bc
    E = expm(M * Ts)
    return E[:n, :n].copy(), E[:n, n:].copy()


def series(g1: StateSpaceModel, g2: StateSpaceModel) -> StateSpaceModel:
    """Cascade g1 -> g2 (g1 feeds g2), transfer function G2(z) G1(z).

    State ordering is [upstream; downstream], fixed package-wide.
    """
    if g1.p != g2.m:
        raise ValueError(
            f"output dimension of first system ({g1.p}) does not match "
            f"input dimension of second ({g2.m})"
        )
    n1, n2 = g1.n, g2.n
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = g1.A
    A[n1:, :n1] = g2.B @ g1.C
    A[n1:, n1:] = g2.A
    B = np.zeros((n1 + n2, g1.m))
    B[:n1] = g1.B
    B[n1:] = g2.B @ g1.D
    C = np.zeros((g2.p, n1 + n2))
    C[:, :n1] = g2.D @ g1.C
    C[:, n1:] = g2.C
    return StateSpaceModel(A, B, C, g2.D @ g1.D)


def inverse_realization(g: StateSpaceModel) -> StateSpaceModel:
    """State-space inverse (A - B D^-1 C, B D^-1, -D^-1 C, D^-1).

    Requires a square system with a well-conditioned feedthrough.
    """
    if g.m != g.p:
        raise InversionError(
            f"system must be square to invert, got m={g.m}, p={g.p}"
        )
    D = g.D
    cond = np.linalg.cond(D) if D.size else np.inf
    if not np.isfinite(cond) or cond > COND_CAP:
        raise InversionError(
            f"singular or near-singular feedthrough: cond(D) = {cond:.3e} "
            f"exceeds cap {COND_CAP:.0e}"
        )
    Di = np.linalg.inv(D)
    return StateSpaceModel(g.A - g.B @ Di @ g.C, g.B @ Di, -Di @ g.C, Di)


def spectral_radius(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def is_schur(A, tol: float = SCHUR_TOL) -> bool:
    """True iff all eigenvalues satisfy |lambda| < 1 - tol."""
    A = np.asarray(A, dtype=float)
    if A.size and not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    return spectral_radius(A) < 1.0 - tol


def lyapunov_certificate(A, tol: float = SCHUR_TOL):
    """Solve A' Z A - Z = -I for a Schur-stable A.

    Returns a :class:`LyapunovCertificate`, or ``None`` when A is not
    Schur stable (shares the stability tolerance with :func:`is_schur`,
    so a certificate exists iff ``is_schur(A, tol)``).
    """
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return LyapunovCertificate(Z=np.zeros((0, 0)), margin=1.0)
    if not is_schur(A, tol):
        return None
    Z = solve_discrete_lyapunov(A.T, np.eye(A.shape[0]))
    Z = 0.5 * (Z + Z.T)
    margin = float(np.min(np.linalg.eigvalsh(Z - A.T @ Z @ A)))
    return LyapunovCertificate(Z=Z, margin=margin)


def simulate_lti(sys: StateSpaceModel, u, x0=None):
    """Run x+ = Ax + Bu, y = Cx + Du over an input sequence.

    Parameters
    ----------
    u : (T, m) array of inputs.
    x0 : optional initial state, zeros by default.

    Returns
    -------
    y : (T, p) outputs, x : (T + 1, n) state trajectory.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != sys.m:
        raise ValueError(f"input has {u.shape[1]} channels, expected {sys.m}")
    T = u.shape[0]
    x = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x.shape != (sys.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({sys.n},)")
    ys = np.empty((T, sys.p))
    xs = np.empty((T + 1, sys.n))
    xs[0] = x
    for k in range(T):
        ys[k] = sys.C @ x + sys.D @ u[k]
        x = sys.A @ x + sys.B @ u[k]
        xs[k + 1] = x
    return ys, xs


def _bilinear_to_continuous(sys: StateSpaceModel):
    """Map z = (1+s)/(1-s); the unit circle goes to the imaginary axis.

    The map is norm preserving, so the H-infinity norm of the image
    equals that of the original.  Requires A Schur (so I + A invertible).
    """
    n = sys.n
    M = np.linalg.inv(np.eye(n) + sys.A)
    Ac = M @ (sys.A - np.eye(n))
    Bc = M @ sys.B
    Cc = 2.0 * sys.C @ M
    Dc = sys.D - sys.C @ M @ sys.B
    return Ac, Bc, Cc, Dc


def _hamiltonian_has_imag_eig(Ac, Bc, Cc, Dc, gamma: float) -> bool:
    """Test gamma <= ||G||_inf via imaginary eigenvalues of the Hamiltonian."""
    m = Bc.shape[1]
    p = Cc.shape[0]
    R = gamma**2 * np.eye(m) - Dc.T @ Dc
    if np.min(np.linalg.eigvalsh(R)) <= 0:
        return True  # gamma <= sigma_max(Dc) <= norm
    S = gamma**2 * np.eye(p) - Dc @ Dc.T
    Ri = np.linalg.inv(R)
    Si = np.linalg.inv(S)
    At = Ac + Bc @ Ri @ Dc.T @ Cc
    H = np.block(
        [
            [At, gamma * Bc @ Ri @ Bc.T],
            [-gamma * Cc.T @ Si @ Cc, -At.T],
        ]
    )
    eigs = np.linalg.eigvals(H)
    return bool(np.any(np.abs(eigs.real) <= 1e-9 * (1.0 + np.abs(eigs))))


def hinf_norm(sys: StateSpaceModel, rtol: float = 1e-9) -> float:
    """H-infinity norm of a discrete-time system by gamma bisection.

    The system is mapped to continuous time with a bilinear transform
    (norm preserving on the boundary) and each bisection step checks the
    Hamiltonian matrix for imaginary-axis eigenvalues.  Returns ``inf``
    for unstable systems.
    """
    if sys.n and not is_schur(sys.A):
        return np.inf
    if sys.n == 0:
        return float(np.linalg.norm(sys.D, 2)) if sys.D.size else 0.0
    Ac, Bc, Cc, Dc = _bilinear_to_continuous(sys)
    # lower bound from boundary samples, including z = -1 (via Dc) and z = 1
    samples = [np.exp(1j * w) for w in np.linspace(0.0, np.pi * 0.999, 24)]
    lo = float(np.linalg.norm(Dc, 2))
    for z in samples:
        lo = max(lo, float(np.linalg.norm(sys.transfer(z), 2)))
    if lo == 0.0:
        lo = 1e-14
    hi = 2.0 * lo
    for _ in range(80):
        if not _hamiltonian_has_imag_eig(Ac, Bc, Cc, Dc, hi):
            break
        hi *= 2.0
    else:
        raise RuntimeError("H-infinity upper bound search did not terminate")
    lo_b = lo
    while hi - lo_b > rtol * hi:
        mid = 0.5 * (lo_b + hi)
        if _hamiltonian_has_imag_eig(Ac, Bc, Cc, Dc, mid):
            lo_b = mid
        else:
            hi = mid
    return 0.5 * (lo_b + hi)
