"""Single-atom Lindblad dynamics: RK4 stepping, exact propagation, steady states.

Density matrices are plain complex ndarrays.  The integrator is classical
fixed-step RK4 on d rho/dt = -i[H, rho] + D[rho] with Hermitian
symmetrization after each step; the step size should satisfy
dt * max(||H||, Gamma) <= 0.05 for the accuracy guarantees exercised in
the tests.  ``exact_evolve`` (matrix exponential of the vectorized
Liouvillian) serves as the oracle and is intended for small dimensions.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .levels import LevelScheme

Dissipators = list[tuple[np.ndarray, float]]


def polariton_vacuum(scheme: LevelScheme) -> np.ndarray:
    """Initial medium state: an incoherent 50/50 mixture of the two
    stretched ground states, no coherences."""
    rho = np.zeros((scheme.dim, scheme.dim), dtype=complex)
    a, b = scheme.vacuum_labels
    rho[scheme.index(a), scheme.index(a)] = 0.5
    rho[scheme.index(b), scheme.index(b)] = 0.5
    return rho


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, dissipators: Dissipators) -> np.ndarray:
    """Right-hand side -i[H, rho] + sum_k gamma_k D[L_k](rho)."""
    if rho.shape != h.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape} vs H {h.shape}")
    out = -1j * (h @ rho - rho @ h)
    for op, rate in dissipators:
        ld = op @ rho @ op.conj().T
        aa = op.conj().T @ op
        out += rate * (ld - 0.5 * (aa @ rho + rho @ aa))
    return out


def step(
    rho: np.ndarray,
    h,
    dissipators: Dissipators,
    dt: float,
    t: float = 0.0,
    check_positivity: bool = True,
) -> np.ndarray:
    """One RK4 step of the Lindblad equation.

    ``h`` may be a constant matrix or a callable t -> matrix (evaluated at
    the three RK4 stage times).  The result is re-symmetrized; trace is
    preserved to round-off because the RHS is exactly traceless.  A step
    producing an eigenvalue below -1e-6 raises (dt too large), positivity
    is otherwise monitored, not enforced.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if callable(h):
        h0, h1, h2 = h(t), h(t + 0.5 * dt), h(t + dt)
    else:
        h0 = h1 = h2 = h
    k1 = lindblad_rhs(rho, h0, dissipators)
    k2 = lindblad_rhs(rho + 0.5 * dt * k1, h1, dissipators)
    k3 = lindblad_rhs(rho + 0.5 * dt * k2, h1, dissipators)
    k4 = lindblad_rhs(rho + dt * k3, h2, dissipators)
    out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = 0.5 * (out + out.conj().T)
    if check_positivity:
        lam_min = np.linalg.eigvalsh(out)[0]
        if lam_min < -1e-6:
            raise NumericalError(
                f"positivity violated (min eigenvalue {lam_min:.2e}); reduce dt"
            )
    return out


class NumericalError(RuntimeError):
    """Raised when an integration or solve leaves its validity domain."""


def liouvillian(h: np.ndarray, dissipators: Dissipators) -> np.ndarray:
    """Superoperator matrix L with vec(d rho/dt) = L vec(rho).

    Uses row-major (C-order) vectorization: vec(A rho B) = (A (x) B^T) vec(rho).
    """
    n = h.shape[0]
    eye = np.eye(n)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in dissipators:
        aa = op.conj().T @ op
        lv += rate * (
            np.kron(op, op.conj())
            - 0.5 * (np.kron(aa, eye) + np.kron(eye, aa.T))
        )
    return lv


def exact_evolve(
    rho: np.ndarray, h: np.ndarray, dissipators: Dissipators, t: float
) -> np.ndarray:
    """Propagate rho for time t under a constant H via expm of the
    Liouvillian.  Oracle-grade; meant for dim <= 8."""
    lv = liouvillian(h, dissipators)
    vec = expm(lv * t) @ rho.reshape(-1)
    out = vec.reshape(rho.shape)
    return 0.5 * (out + out.conj().T)


def vacuum_tie_break_ops(scheme: LevelScheme) -> Dissipators:
    """Weak relaxation channels that select the polariton vacuum among
    degenerate stationary states: symmetric population exchange between
    the two stretched ground states plus drain of every other ground
    state into them.  Rates are relative weights (unit scale)."""
    n = scheme.dim
    a, b = scheme.vacuum_labels
    ia, ib = scheme.index(a), scheme.index(b)
    ops: Dissipators = []

    def jump(i: int, j: int) -> np.ndarray:
        op = np.zeros((n, n), dtype=complex)
        op[i, j] = 1.0
        return op

    ops.append((jump(ia, ib), 1.0))
    ops.append((jump(ib, ia), 1.0))
    for lbl in scheme.ground_labels:
        if lbl in (a, b):
            continue
        k = scheme.index(lbl)
        ops.append((jump(ia, k), 0.5))
        ops.append((jump(ib, k), 0.5))
    return ops


def steady_state(
    h: np.ndarray,
    dissipators: Dissipators,
    tie_break: Dissipators | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Stationary state of the Liouvillian, trace-normalized.

    A unique kernel is returned directly.  If the kernel is degenerate
    and ``tie_break`` operators are given, first-order degenerate
    perturbation theory selects the kernel element that is also
    stationary under the tie-break dissipators (this reproduces the
    optically pumped vacuum when nothing is driven).  A degeneracy that
    the tie-break cannot resolve raises :class:`NumericalError`.
    """
    lv = liouvillian(h, dissipators)
    _, svals, vh = np.linalg.svd(lv)
    smax = max(svals[0], 1.0)
    kernel = vh[svals <= tol * smax].conj().T  # (n^2, k)
    k = kernel.shape[1]
    if k == 0:
        raise NumericalError("Liouvillian has no null vector at the given tolerance")
    if k == 1:
        vec = kernel[:, 0]
    else:
        if tie_break is None:
            raise NumericalError(
                f"stationary state degenerate (kernel dim {k}) and no tie-break given"
            )
        lmix = liouvillian(np.zeros_like(h), tie_break)
        reduced = kernel.conj().T @ (lmix @ kernel)
        _, rs, rvh = np.linalg.svd(reduced)
        rnull = rvh[rs <= max(tol * max(rs[0], 1.0), 1e-12)].conj().T
        if rnull.shape[1] != 1:
            raise NumericalError(
                "tie-break does not single out a stationary state "
                f"(residual degeneracy {rnull.shape[1]})"
            )
        vec = kernel @ rnull[:, 0]
    n = h.shape[0]
    rho = vec.reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise NumericalError("null vector is traceless; no physical steady state")
    return rho / tr
