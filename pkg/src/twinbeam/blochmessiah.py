"""Bloch-Messiah structure of twin-beam propagators.

Factors a symplectic propagator as S = O D O-tilde^T with O, O-tilde
orthogonal symplectic and D = diag(lam, 1/lam), then rearranges the
doubly-degenerate spectrum into independent two-mode squeezers, one signal
mode paired with one idler mode each, and extracts the complex input/output
mode functions.

The factorization route is polar: P = (S S^T)^{1/2} is diagonalized by an
orthogonal symplectic O (built from the upper half of the spectrum through
the unitary representation Z = X + iY), and the passive remainder K = P^{-1} S
supplies O-tilde = K^T O.  Eigenvector bases returned by a dense symmetric
solver mix freely inside numerically degenerate clusters; away from lam = 1
that mixing is harmless (the isotropy of each cluster subspace is basis
independent), at lam = 1 the cluster contains symplectic partners and a
complex pivoted QR on the whole cluster is used to pull out a proper unitary
half.  A final unitary polish (Lowdin orthogonalization) scrubs the
remaining roundoff so both factors meet tight orthogonality and symplectic
residuals.
"""

from dataclasses import dataclass, replace
from typing import List

import numpy as np
from scipy.linalg import qr as _qr

from . import numerics
from .errors import ConfigError, ContractError, DecompositionError
from .propagator import (
    Propagator, compose, double_pass, free_propagator, mean_photons,
    symplectic_residual,
)

__all__ = [
    "BlochMessiahResult", "SchmidtMode", "Decomposition", "bloch_messiah",
    "two_mode_rearrange", "embed_unitary", "pair_mixer", "decompose",
    "squeezing_spectrum", "mean_photons_from_spectrum", "tune_gain",
]

# Relative symplectic-defect allowance on inputs, scaled by max|S|^2.
INPUT_SYMPLECTIC_TOL = 1e-9
# Reciprocal-pairing tolerance on eigenvalues of S S^T.
PAIRING_RTOL = 1e-6
# Width of the lam = 1 cluster treated as passive (on lam^2).
UNIT_CTOL = 1e-9
# Degeneracy tolerance for the two-mode pairing of the lam spectrum.
PAIR_RTOL = 1e-8
# Residual allowances on the recovered factors and the reconstruction.
FACTOR_TOL = 1e-9
RECON_RTOL = 1e-8
# Squeezing below this is reported as exactly passive.
R_CLAMP = 1e-12
# Beam-support leakage above this marks a mode pair as mixed.
MIX_TOL = 1e-6


@dataclass(frozen=True)
class BlochMessiahResult:
    """S = O diag(lam, 1/lam) O_tilde^T, lam descending, lam >= 1."""

    O: np.ndarray
    lam: np.ndarray
    O_tilde: np.ndarray

    @property
    def half(self):
        return self.lam.size

    def D(self):
        return np.diag(np.concatenate([self.lam, 1.0 / self.lam]))

    def reconstruct(self):
        return self.O @ self.D() @ self.O_tilde.T


def embed_unitary(Z):
    """Real orthogonal symplectic [[X, -Y], [Y, X]] from a unitary Z = X + iY."""
    X, Y = Z.real, Z.imag
    return np.block([[X, -Y], [Y, X]])


def _complex_rep(O, h):
    """Inverse of embed_unitary for an exactly embedded matrix."""
    return O[:h, :h] + 1j * O[h:, :h]


def _complex_rep_avg(M, h):
    """Complex representative of a nearly embedded matrix, block-averaged."""
    X = 0.5 * (M[:h, :h] + M[h:, h:])
    Y = 0.5 * (M[h:, :h] - M[:h, h:])
    return X + 1j * Y


def _polish_unitary(Z, context):
    """Lowdin orthogonalization Z (Z^H Z)^{-1/2} via SVD."""
    u, s, vh = np.linalg.svd(Z)
    if s[-1] < 0.5:
        raise DecompositionError(
            "%s: candidate unitary is singular (smallest singular value %.3e)"
            % (context, s[-1])
        )
    return u @ vh


def bloch_messiah(S):
    """Decompose a symplectic S into O diag(lam, 1/lam) O_tilde^T.

    Raises ContractError if S is not symplectic to working tolerance and
    DecompositionError if the spectrum does not pair reciprocally or a factor
    fails its residual checks.
    """
    S = np.asarray(S, dtype=float)
    dim = S.shape[0]
    if S.shape != (dim, dim) or dim % 2:
        raise ConfigError("symplectic input must be square with even dimension")
    h = dim // 2
    smax = float(np.max(np.abs(S)))
    resid = symplectic_residual(S)
    if resid > INPUT_SYMPLECTIC_TOL * max(1.0, smax**2):
        raise ContractError(
            "input is not symplectic: residual %.3e exceeds tolerance" % resid
        )

    w, V = numerics.sym_eig(S @ S.T)
    if w[0] <= 0:
        raise DecompositionError("S S^T has a non-positive eigenvalue %.3e" % w[0])
    products = w * w[::-1]
    worst = float(np.max(np.abs(products - 1.0)))
    if worst > PAIRING_RTOL:
        raise DecompositionError(
            "eigenvalues of S S^T do not pair reciprocally (worst defect %.3e)" % worst
        )

    w_desc = w[::-1]
    V_desc = V[:, ::-1]
    n_above = int(np.sum(w_desc > 1.0 + UNIT_CTOL))
    n_below = int(np.sum(w_desc < 1.0 - UNIT_CTOL))
    if n_above != n_below:
        raise DecompositionError(
            "unit-cluster imbalance: %d eigenvalues above 1, %d below" % (n_above, n_below)
        )
    n_unit = dim - n_above - n_below
    m_unit = n_unit // 2

    # Active directions: eigenvectors are isotropic per cluster automatically.
    top = V_desc[:, :n_above]
    Z_cols = [top[:h, :] + 1j * top[h:, :]]
    if m_unit:
        cluster = V_desc[:, n_above:n_above + n_unit]
        Wc = cluster[:h, :] + 1j * cluster[h:, :]
        Q, R, _ = _qr(Wc, mode="economic", pivoting=True)
        if abs(R[m_unit - 1, m_unit - 1]) < 1e-6:
            raise DecompositionError(
                "failed to extract a unitary half of the passive cluster"
            )
        Q = Q[:, :m_unit]
        # The passive subspace comes out of the eigensolver in an arbitrary
        # rotation; align it to the best-covered bin basis columns (orthogonal
        # Procrustes) for a deterministic representative.  S = I then yields
        # O = O_tilde = I instead of some random passive basis.
        cover = np.sum(np.abs(Q) ** 2, axis=1)
        cols = np.sort(np.argsort(-cover, kind="stable")[:m_unit])
        try:
            Q = Q @ _polish_unitary(Q.conj().T[:, cols], "passive alignment")
        except DecompositionError:
            pass  # ill-covered target; the unaligned basis is still valid
        Z_cols.append(Q)
    Z = np.hstack(Z_cols)
    Z = _polish_unitary(Z, "active factor")
    O = embed_unitary(Z)
    lam = np.concatenate([np.sqrt(w_desc[:n_above]), np.ones(m_unit)])

    # Passive remainder via the exact (uncluttered) spectral data of P.
    P_inv = (V * (1.0 / np.sqrt(w))) @ V.T
    K = P_inv @ S
    O_tilde_raw = K.T @ O
    embed_defect = float(
        np.max(np.abs(O_tilde_raw - embed_unitary(_complex_rep_avg(O_tilde_raw, h))))
    )
    if embed_defect > 1e-6:
        raise DecompositionError(
            "passive factor is far from orthogonal symplectic (defect %.3e)"
            % embed_defect
        )
    O_tilde = embed_unitary(_polish_unitary(_complex_rep_avg(O_tilde_raw, h), "passive factor"))

    result = BlochMessiahResult(O=O, lam=lam, O_tilde=O_tilde)
    for name, M in (("O", O), ("O_tilde", O_tilde)):
        orth = float(np.max(np.abs(M.T @ M - np.eye(dim))))
        if orth > FACTOR_TOL or symplectic_residual(M) > FACTOR_TOL:
            raise DecompositionError(
                "%s fails orthogonal-symplectic residuals (orthogonality %.3e)"
                % (name, orth)
            )
    recon = float(np.max(np.abs(result.reconstruct() - S)))
    if recon > RECON_RTOL * max(1.0, smax):
        raise DecompositionError(
            "reconstruction residual %.3e exceeds %.1e relative" % (recon, RECON_RTOL)
        )
    return result


def pair_mixer(n_pairs):
    """Block-diagonal unitary of 50:50 pair mixers w = (1/sqrt2) [[1, i], [i, 1]].

    Applied on the right of the active complex basis, it turns each
    degenerate lam pair of single-mode squeezers into one two-mode squeezer.
    """
    w = np.array([[1.0, 1.0j], [1.0j, 1.0]]) / np.sqrt(2.0)
    B = np.zeros((2 * n_pairs, 2 * n_pairs), dtype=complex)
    for k in range(n_pairs):
        B[2 * k:2 * k + 2, 2 * k:2 * k + 2] = w
    return B


def two_mode_rearrange(bm):
    """Pair the degenerate lam spectrum and mix into two-mode squeezers.

    Returns (U_out, U_in, r): complex mode matrices (columns 2k, 2k+1 belong
    to squeezer k) and the per-squeezer parameters r_k, tiny values clamped
    to zero.  Raises DecompositionError when the spectrum does not come in
    degenerate pairs (not a twin-beam propagator).
    """
    lam = bm.lam
    h = lam.size
    if h % 2:
        raise DecompositionError("odd active dimension cannot pair into squeezers")
    a, b = lam[0::2], lam[1::2]
    defect = np.abs(a - b) / np.maximum(1.0, np.maximum(a, b))
    if np.max(defect) > PAIR_RTOL:
        k = int(np.argmax(defect))
        raise DecompositionError(
            "lam spectrum is not doubly degenerate at pair %d: %r vs %r"
            % (k, a[k], b[k])
        )
    B = pair_mixer(h // 2)
    U_out = _complex_rep(bm.O, h) @ B
    U_in = _complex_rep(bm.O_tilde, h) @ B
    r = 0.5 * (np.log(a) + np.log(b))
    r[r < R_CLAMP] = 0.0
    return U_out, U_in, r


@dataclass(frozen=True)
class SchmidtMode:
    """One squeezer mode function on the stacked (signal, idler) bin space."""

    k: int                    # squeezer index, 0-based, descending r
    beam: str                 # "signal" or "idler"
    direction: str            # "in" or "out"
    r: float
    amplitudes: np.ndarray    # complex, length 2N
    mixed: bool

    def beam_amplitudes(self, n):
        """The N amplitudes on this mode's own beam."""
        return self.amplitudes[:n] if self.beam == "signal" else self.amplitudes[n:]

    @property
    def passive(self):
        return self.r <= R_CLAMP


@dataclass(frozen=True)
class Decomposition:
    """Full two-mode squeezer structure of one propagator."""

    grid: object
    lam: np.ndarray
    r: np.ndarray
    O: np.ndarray
    O_tilde: np.ndarray
    U_out: np.ndarray
    U_in: np.ndarray
    modes: List[SchmidtMode]
    mixed_pairs: List[int]

    @property
    def n_pairs(self):
        return self.r.size

    def active_pairs(self):
        return [k for k in range(self.n_pairs) if self.r[k] > R_CLAMP]

    def pair_modes(self, k, direction):
        """(signal_mode, idler_mode) of squeezer k for one direction."""
        sig = idl = None
        for m in self.modes:
            if m.k == k and m.direction == direction:
                if m.beam == "signal":
                    sig = m
                else:
                    idl = m
        if sig is None or idl is None:
            raise ConfigError("no such squeezer: k=%r direction=%r" % (k, direction))
        return sig, idl

    def mean_photons(self):
        return mean_photons_from_spectrum(self.r)


def _beam_support(u, n):
    return float(np.sum(np.abs(u[:n]) ** 2))


def _gauge_fix(u, n, beam):
    """Rotate the column phase so its central beam amplitude is real positive."""
    sl = u[:n] if beam == "signal" else u[n:]
    c = (n - 1) // 2
    anchor = sl[c]
    if abs(anchor) <= 1e-12 * np.linalg.norm(sl):
        anchor = sl[int(np.argmax(np.abs(sl)))]
    if abs(anchor) == 0.0:
        return u
    return u * (abs(anchor) / anchor)


def _extract_modes(U_out, U_in, r, n):
    """Classify each squeezer's columns by beam and gauge them for reporting."""
    modes = []
    mixed_pairs = []
    for k in range(r.size):
        pair_mixed = False
        for direction, U in (("out", U_out), ("in", U_in)):
            ua, ub = U[:, 2 * k].copy(), U[:, 2 * k + 1].copy()
            sa, sb = _beam_support(ua, n), _beam_support(ub, n)
            if sa >= sb:
                sig, idl, s_sig, s_idl = ua, ub, sa, sb
            else:
                sig, idl, s_sig, s_idl = ub, ua, sb, sa
            leak = max(1.0 - s_sig, s_idl)
            if leak > MIX_TOL:
                pair_mixed = True
            modes.append(SchmidtMode(
                k=k, beam="signal", direction=direction, r=float(r[k]),
                amplitudes=_gauge_fix(sig, n, "signal"), mixed=leak > MIX_TOL,
            ))
            modes.append(SchmidtMode(
                k=k, beam="idler", direction=direction, r=float(r[k]),
                amplitudes=_gauge_fix(idl, n, "idler"), mixed=leak > MIX_TOL,
            ))
        if pair_mixed:
            mixed_pairs.append(k)
    return modes, mixed_pairs


def decompose(prop, grid, medium=None, double=False, remove_free_phase=False):
    """Squeezer structure of a propagator built on the given grid.

    remove_free_phase strips the walk-off phases each beam accumulates over
    the pass path from the output side before factorizing (input modes are
    untouched); this needs the medium.  The double flag must match how the
    propagator was built, since the return pass swaps the beam velocities.
    """
    if isinstance(prop, Propagator):
        S = prop.matrix
        n = prop.n
    else:
        S = np.asarray(prop, dtype=float)
        n = S.shape[0] // 4
    if grid.n != n:
        raise ConfigError("grid size %d does not match propagator bins %d" % (grid.n, n))
    if remove_free_phase:
        if medium is None:
            raise ConfigError("remove_free_phase needs the medium")
        F = free_propagator(grid, medium, medium.length).matrix
        if double:
            F = free_propagator(grid, medium.swapped(), medium.length).matrix @ F
        S = F.T @ S
    bm = bloch_messiah(S)
    U_out, U_in, r = two_mode_rearrange(bm)
    modes, mixed_pairs = _extract_modes(U_out, U_in, r, n)
    return Decomposition(
        grid=grid, lam=bm.lam, r=r, O=bm.O, O_tilde=bm.O_tilde,
        U_out=U_out, U_in=U_in, modes=modes, mixed_pairs=mixed_pairs,
    )


def squeezing_spectrum(decomp):
    """Per-squeezer parameters r_k, descending."""
    return decomp.r.copy()


def mean_photons_from_spectrum(r):
    """Mean photons per beam, sum_k sinh^2 r_k."""
    return float(np.sum(np.sinh(np.asarray(r)) ** 2))


def tune_gain(grid, pump, medium, poling, target, double=False, gain2_scale=1.0,
              tol=1e-4, max_iter=80):
    """Find g0 such that the mean signal photon number hits the target.

    Bisection on the pump amplitude; the photon number is monotone in g0.
    Returns (g0, achieved).  Uses the trace of S S^T, so no mode
    decomposition is performed per evaluation.
    """
    if not (target >= 0):
        raise ConfigError("target photon number must be nonnegative")
    if target == 0:
        return 0.0, 0.0

    def photons(g0):
        p = replace(pump, g0=g0)
        if double:
            prop = double_pass(grid, p, medium, poling, gain2_scale=gain2_scale)
        else:
            prop = compose(grid, p, medium, poling)
        ns, _ = mean_photons(prop.matrix, grid.n)
        return ns

    lo, hi = 0.0, max(abs(pump.g0), 1.0)
    f_hi = photons(hi)
    grow = 0
    while f_hi < target:
        lo, hi = hi, hi * 2.0
        f_hi = photons(hi)
        grow += 1
        if grow > 60:
            raise ContractError("gain bracket did not reach the target photon number")
    g, f_g = hi, f_hi
    for _ in range(max_iter):
        if abs(f_g - target) <= tol:
            break
        mid = 0.5 * (lo + hi)
        f_mid = photons(mid)
        if f_mid < target:
            lo = mid
        else:
            hi = mid
        g, f_g = mid, f_mid
    else:
        if abs(f_g - target) > tol:
            raise ContractError(
                "gain tuning stalled at %.6g photons (target %.6g)" % (f_g, target)
            )
    return g, f_g
