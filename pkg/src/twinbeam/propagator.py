"""Symplectic propagation through piecewise-constant poling.

Each poling domain has z-independent coupling matrices, so its propagator is
a single matrix exponential S = expm(dz * Q).  A full device is the ordered
(left-multiplied) product of its domain propagators; a double pass appends
the return trip with signal/idler velocities exchanged and the domain order
reversed.

In the SGVM regime (H = -G) the generator block-diagonalizes in a fixed
orthogonal basis into a 2N x 2N block A and its companion -A^T, and every
domain, hence every product, is tracked in that 2N space.  The full 4N
matrix is assembled once at the end.  Both routes agree to tight tolerance;
the block route exists for speed and because downstream spectral analysis
works on the 2N block directly.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics
from .errors import ConfigError, ContractError
from .model import build_coupled_matrices

__all__ = [
    "Propagator", "SegmentCache", "segment_propagator", "compose",
    "double_pass", "free_propagator", "symplectic_form",
    "symplectic_residual", "mean_photons", "sgvm_split_basis", "sgvm_block",
    "assemble_from_block", "save_matrix", "load_matrix",
]

SYMPLECTIC_TOL = 1e-9

# Relative agreement required between poling total width and medium length.
LENGTH_MATCH_RTOL = 1e-9


def symplectic_form(dim):
    """Omega = [[0, I], [-I, 0]] for an even total dimension."""
    if dim % 2:
        raise ConfigError("symplectic dimension must be even, got %d" % dim)
    h = dim // 2
    omega = np.zeros((dim, dim))
    omega[:h, h:] = np.eye(h)
    omega[h:, :h] = -np.eye(h)
    return omega


def symplectic_residual(S):
    """max |S Omega S^T - Omega|, zero for an exact symplectic matrix."""
    omega = symplectic_form(S.shape[0])
    return float(np.max(np.abs(S @ omega @ S.T - omega)))


@dataclass(frozen=True)
class Propagator:
    """A symplectic propagator on the 4N quadrature space.

    block, when present, is the 2N x 2N matrix A such that
    matrix = B diag(A, A^{-T}) B^T in the fixed SGVM splitting basis B; it is
    carried only while every composed segment admits that reduction.
    """

    matrix: np.ndarray
    n: int
    block: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.matrix.shape != (4 * self.n, 4 * self.n):
            raise ContractError(
                "propagator matrix shape %r does not match n=%d"
                % (self.matrix.shape, self.n)
            )

    def mean_photons(self):
        return mean_photons(self.matrix, self.n)


def mean_photons(S, n):
    """Per-beam mean photon numbers (N_signal, N_idler) from vacuum input.

    Vacuum covariance is I/2, so diag(S S^T)/2 holds the quadrature second
    moments and each beam contributes (sum of its X and P diagonals)/4 - N/2.
    """
    row_power = np.sum(S * S, axis=1)
    sig = float(np.sum(row_power[0:n]) + np.sum(row_power[2 * n:3 * n]))
    idl = float(np.sum(row_power[n:2 * n]) + np.sum(row_power[3 * n:4 * n]))
    return sig / 4.0 - n / 2.0, idl / 4.0 - n / 2.0


def sgvm_split_basis(n):
    """Orthogonal 4N basis that block-diagonalizes every SGVM generator.

    B = (1/sqrt 2) [[I,0,0,I],[0,I,I,0],[0,-I,I,0],[-I,0,0,I]] in the
    (X_S, X_I, P_S, P_I) ordering; B^T Q B = diag(A, -A^T) whenever H = -G.
    """
    i = np.eye(n)
    z = np.zeros((n, n))
    return np.block([
        [i, z, z, i],
        [z, i, i, z],
        [z, -i, i, z],
        [-i, z, z, i],
    ]) / np.sqrt(2.0)


def sgvm_block(matrices):
    """The reduced generator block A = [[-F, G], [-G, -F]] (requires H = -G)."""
    if not matrices.sgvm:
        raise ContractError("block reduction requires the SGVM regime (H = -G)")
    return np.block([
        [-matrices.F, matrices.G],
        [-matrices.G, -matrices.F],
    ])


def assemble_from_block(A, n):
    """Reassemble the 4N propagator B diag(A, A^{-T}) B^T from its 2N block."""
    B = sgvm_split_basis(n)
    lower = np.linalg.inv(A).T
    core = np.zeros((4 * n, 4 * n))
    core[:2 * n, :2 * n] = A
    core[2 * n:, 2 * n:] = lower
    return B @ core @ B.T


def segment_propagator(matrices, dz):
    """Propagator of one uniform domain of width dz.

    SGVM input takes the 2N block-exponential route; otherwise the full 4N
    exponential is formed.  Both return the same Propagator contract.
    """
    if not (dz > 0):
        raise ConfigError("segment width must be positive")
    n = matrices.G.shape[0]
    if matrices.sgvm:
        A = numerics.expm(dz * sgvm_block(matrices))
        return Propagator(matrix=assemble_from_block(A, n), n=n, block=A)
    Z = np.zeros((n, n))
    G, H, F = matrices.G, matrices.H, matrices.F
    Q = np.block([
        [Z, Z, -G, F],
        [Z, Z, F, -H],
        [G, F, Z, Z],
        [F, H, Z, Z],
    ])
    return Propagator(matrix=numerics.expm(dz * Q), n=n, block=None)


class SegmentCache:
    """Memo for domain propagators, keyed by (width, sign, tag).

    Width is folded to 15 significant digits so regenerated-but-equal domain
    widths hit.  The tag separates contexts that must not share entries
    (forward vs return pass, rescaled pump).
    """

    def __init__(self):
        self._store = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(width, sign, tag):
        return ("%.15e" % width, int(sign), tag)

    def fetch(self, width, sign, tag, builder):
        k = self.key(width, sign, tag)
        try:
            value = self._store[k]
        except KeyError:
            self.misses += 1
            value = self._store[k] = builder()
            return value
        self.hits += 1
        return value


def compose(grid, pump, medium, poling, cache=None, cache_tag=""):
    """Total propagator of one pass through the poled medium.

    Segments are composed left to right (later domains multiply from the
    left).  In the SGVM regime the product is accumulated in the 2N block
    space and assembled once.
    """
    if abs(poling.length - medium.length) > LENGTH_MATCH_RTOL * max(
        poling.length, medium.length
    ):
        raise ConfigError(
            "poling spans %g but medium length is %g"
            % (poling.length, medium.length)
        )
    if cache is None:
        cache = SegmentCache()
    by_sign = {}

    def matrices_for(sign):
        if sign not in by_sign:
            by_sign[sign] = build_coupled_matrices(grid, pump, medium, sign=sign)
        return by_sign[sign]

    use_block = medium.sgvm()
    n = grid.n
    if use_block:
        total = np.eye(2 * n)
        for width, sign in poling.domains:
            seg = cache.fetch(
                width, sign, cache_tag,
                lambda: numerics.expm(width * sgvm_block(matrices_for(sign))),
            )
            total = seg @ total
        return Propagator(matrix=assemble_from_block(total, n), n=n, block=total)
    total = np.eye(4 * n)
    for width, sign in poling.domains:
        seg = cache.fetch(
            width, sign, cache_tag,
            lambda: segment_propagator(matrices_for(sign), width).matrix,
        )
        total = seg @ total
    return Propagator(matrix=total, n=n, block=None)


def double_pass(grid, pump, medium, poling, gain2_scale=1.0, cache=None):
    """Forward pass followed by a return pass with v_S and v_I exchanged.

    The return pass traverses the domains in reverse order; gain2_scale
    multiplies the pump amplitude of the second pass only (imperfect
    double-pass modeling).
    """
    if cache is None:
        cache = SegmentCache()
    first = compose(grid, pump, medium, poling, cache=cache, cache_tag="fwd")
    second = compose(
        grid,
        pump.scaled(gain2_scale),
        medium.swapped(),
        poling.reversed_(),
        cache=cache,
        cache_tag="rev",
    )
    matrix = second.matrix @ first.matrix
    block = None
    if first.block is not None and second.block is not None:
        block = second.block @ first.block
    return Propagator(matrix=matrix, n=grid.n, block=block)


def free_propagator(grid, medium, length):
    """Propagator with the pump off: pure walk-off phase rotation.

    Each signal bin rotates by kappa_S d_n length in its (X, P) plane, each
    idler bin by kappa_I d_n length.  Negative lengths are allowed (used to
    strip accumulated phases).
    """
    n = grid.n
    d = grid.detunings
    out = np.zeros((4 * n, 4 * n))
    for offset, kappa in ((0, medium.kappa_signal), (n, medium.kappa_idler)):
        theta = kappa * d * length
        c, s = np.cos(theta), np.sin(theta)
        rows = np.arange(n) + offset
        out[rows, rows] = c
        out[rows, rows + 2 * n] = -s
        out[rows + 2 * n, rows] = s
        out[rows + 2 * n, rows + 2 * n] = c
    return Propagator(matrix=out, n=n, block=None)


def save_matrix(M, path):
    """Text dump: `rows cols` header then one row per line, full precision."""
    M = np.asarray(M)
    with open(path, "w") as fh:
        fh.write("%d %d\n" % M.shape)
        for row in M:
            fh.write(" ".join(repr(float(x)) for x in row))
            fh.write("\n")


def load_matrix(path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ConfigError("%s: expected `rows cols` header" % path)
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        raise ConfigError(
            "%s: header promises %dx%d but body is %r" % (path, rows, cols, data.shape)
        )
    return data
