"""Multiplicative-watermark filter banks.

A bank holds the matched quadruple (G, H) on the input channel and
(W, Q) on the output channel for one switching epoch.  The user supplies
H and Q; their partners are exact state-space inverses (G = H^-1,
W = Q^-1), so cascading sender and receiver filters is the identity map
and legitimate operation is unaffected.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .statespace import (
    InversionError,
    LyapunovCertificate,
    StateSpaceModel,
    inverse_realization,
    is_schur,
    lyapunov_certificate,
    series,
    simulate_lti,
    spectral_radius,
)

__all__ = [
    "WatermarkFilter",
    "WatermarkBank",
    "FilterDesignError",
    "make_bank",
    "verify_pair",
    "FeedthroughSampler",
    "sample_feedthroughs",
    "random_stable_bank",
]

SIGMAS = ("g", "h", "w", "q")

#: Two feedthrough draws closer than this are treated as equal and redrawn,
#: keeping draws pairwise distinct across epochs.
DISTINCT_TOL = 1e-12


class FilterDesignError(ValueError):
    """A candidate filter violates a bank precondition.

    ``sigma`` names the offending filter and ``reason`` is one of
    ``"unstable"``, ``"inverse_unstable"`` or ``"singular_feedthrough"``,
    so a search can tell which step of the candidate screen failed.
    """

    def __init__(self, sigma: str, reason: str, detail: str = ""):
        self.sigma = sigma
        self.reason = reason
        msg = f"filter {sigma}: {reason.replace('_', ' ')}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


@dataclass(frozen=True)
class WatermarkFilter:
    """One filter's parameters: channel tag, realization and epoch."""

    sigma: str
    sys: StateSpaceModel
    epoch: int = 0

    def __post_init__(self):
        if self.sigma not in SIGMAS:
            raise ValueError(f"sigma must be one of {SIGMAS}, got {self.sigma!r}")
        if self.sys.m != self.sys.p:
            raise FilterDesignError(self.sigma, "not_square",
                                    f"m={self.sys.m}, p={self.sys.p}")

    @property
    def theta(self) -> np.ndarray:
        """Parameter vector: vectorized A, B, C, D concatenated."""
        s = self.sys
        return np.concatenate(
            [s.A.ravel(), s.B.ravel(), s.C.ravel(), s.D.ravel()]
        )


@dataclass(frozen=True)
class WatermarkBank:
    """Matched filter quadruple at one epoch, with stability certificates.

    By construction g = h^-1 and w = q^-1 (exact matrix identities), and
    all four A-matrices carry Lyapunov certificates.
    """

    g: WatermarkFilter
    h: WatermarkFilter
    w: WatermarkFilter
    q: WatermarkFilter
    certificates: dict[str, LyapunovCertificate] = field(repr=False)
    epoch: int = 0

    @property
    def filters(self) -> dict[str, WatermarkFilter]:
        return {"g": self.g, "h": self.h, "w": self.w, "q": self.q}


def _screen(sys: StateSpaceModel, sigma: str, inv_sigma: str):
    """Stability/invertibility screen for one defining filter.

    Returns the inverse realization; raises FilterDesignError naming the
    failing side so callers can distinguish a bad filter from a bad
    inverse.
    """
    if not is_schur(sys.A):
        raise FilterDesignError(
            sigma, "unstable", f"spectral radius {spectral_radius(sys.A):.4f}"
        )
    try:
        inv = inverse_realization(sys)
    except InversionError as e:
        raise FilterDesignError(sigma, "singular_feedthrough", str(e)) from e
    if not is_schur(inv.A):
        raise FilterDesignError(
            inv_sigma,
            "inverse_unstable",
            f"spectral radius {spectral_radius(inv.A):.4f}",
        )
    return inv


def make_bank(A_h, B_h, C_h, D_h, A_q, B_q, C_q, D_q,
              epoch: int = 0) -> WatermarkBank:
    """Build a bank from the defining filters H and Q.

    G = H^-1 and W = Q^-1 follow from the block inversion formula, so the
    pairs are matched exactly.  Raises :class:`FilterDesignError` when a
    filter or its inverse is unstable, or a feedthrough is singular.
    """
    h_sys = StateSpaceModel(A_h, B_h, C_h, D_h)
    q_sys = StateSpaceModel(A_q, B_q, C_q, D_q)
    g_sys = _screen(h_sys, "h", "g")
    w_sys = _screen(q_sys, "q", "w")
    certs = {
        "g": lyapunov_certificate(g_sys.A),
        "h": lyapunov_certificate(h_sys.A),
        "w": lyapunov_certificate(w_sys.A),
        "q": lyapunov_certificate(q_sys.A),
    }
    return WatermarkBank(
        g=WatermarkFilter("g", g_sys, epoch),
        h=WatermarkFilter("h", h_sys, epoch),
        w=WatermarkFilter("w", w_sys, epoch),
        q=WatermarkFilter("q", q_sys, epoch),
        certificates=certs,
        epoch=epoch,
    )


def verify_pair(f, finv, horizon: int = 500, seed: int = 0,
                tol: float = 1e-9) -> bool:
    """Check the transparency property of a filter pair by simulation.

    Drives the cascade f -> finv with random inputs from zero initial
    state and checks the output reproduces the input to ``tol``.
    """
    f_sys = f.sys if isinstance(f, WatermarkFilter) else f
    finv_sys = finv.sys if isinstance(finv, WatermarkFilter) else finv
    cascade = series(f_sys, finv_sys)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((horizon, cascade.m))
    y, _ = simulate_lti(cascade, u)
    return bool(np.max(np.abs(y - u)) <= tol)


class FeedthroughSampler:
    """Seeded sampler for the random feedthrough pair (D_h, D_q).

    Draws are uniform on [lo, hi], recorded, and redrawn when they
    collide with any earlier draw: pairwise-distinct feedthroughs across
    epochs guarantee the resulting banks have distinct transfer
    functions, which is what makes the parameter sequence unpredictable
    to an eavesdropper.  Access to the draw record is serialized.
    """

    def __init__(self, seed: int, lo: float = 0.1, hi: float = 0.15,
                 channels: int = 1):
        if lo <= 0:
            raise ValueError(
                f"lower bound must be positive to keep D invertible, got {lo}"
            )
        if hi <= lo:
            raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
        self._rng = np.random.default_rng(seed)
        self.lo = float(lo)
        self.hi = float(hi)
        self.channels = int(channels)
        self._history: list[float] = []
        self._lock = threading.Lock()

    def _draw_scalar(self) -> float:
        for _ in range(1000):
            v = float(self._rng.uniform(self.lo, self.hi))
            if all(abs(v - prev) > DISTINCT_TOL for prev in self._history):
                self._history.append(v)
                return v
        raise RuntimeError("could not draw a distinct feedthrough value")

    def draw(self) -> tuple[np.ndarray, np.ndarray]:
        """Return one (D_h, D_q) pair as diagonal matrices."""
        with self._lock:
            dh = np.diag([self._draw_scalar() for _ in range(self.channels)])
            dq = np.diag([self._draw_scalar() for _ in range(self.channels)])
        return dh, dq

    @property
    def history(self) -> tuple[float, ...]:
        with self._lock:
            return tuple(self._history)


def sample_feedthroughs(rng_seed: int, lo: float, hi: float,
                        channels: int = 1):
    """One-shot draw of (D_h, D_q); see :class:`FeedthroughSampler`."""
    return FeedthroughSampler(rng_seed, lo, hi, channels).draw()


def random_stable_bank(rng, order: int = 2, channels: int = 1,
                       epoch: int = 0, max_tries: int = 200) -> WatermarkBank:
    """Draw a random bank whose filters and inverses are all stable.

    Used by property tests and randomized experiments; rejection-samples
    until the inverse-stability screen passes.
    """
    for _ in range(max_tries):
        mats = []
        ok = True
        for _pair in range(2):
            A = rng.uniform(-0.8, 0.8, size=(order, order))
            r = spectral_radius(A)
            if r > 0:
                A *= rng.uniform(0.2, 0.9) / r
            B = rng.uniform(-1.0, 1.0, size=(order, channels))
            C = rng.uniform(-0.2, 0.2, size=(channels, order))
            D = np.diag(rng.uniform(0.5, 1.5, size=channels))
            mats.append((A, B, C, D))
        try:
            return make_bank(*mats[0], *mats[1], epoch=epoch)
        except FilterDesignError:
            ok = False
        if not ok:
            continue
    raise RuntimeError("failed to sample a stable bank")
