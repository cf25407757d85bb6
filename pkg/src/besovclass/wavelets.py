"""Boundary-adapted orthonormal wavelet bases on [0,1]^d for d in {1, 2}.

Functions are carried on dyadic midpoint grids (nodes (2i+1)/2^(J+1) per
axis) and the wavelet series is realized through the discrete transform,
so Daubechies wavelets never need pointwise evaluation.  The transform is
stored as a cascade of per-level orthonormal matrices:

* ``periodic`` levels place the filter at even translates modulo the
  signal length (exactly orthogonal for any QMF filter);
* ``symmetric`` levels fold the out-of-domain filter tail back by
  half-sample reflection and then re-orthonormalize the level map by
  symmetric (Loewdin) orthogonalization, which perturbs the folded rows
  minimally while restoring exact orthonormality.  Levels shorter than
  the filter fall back to periodic wrapping, where reflection is
  meaningless.

Single-index ordering is coarse-to-fine: index 1 is the scaling
coefficient, then detail levels in increasing resolution.  In 2D the
three detail sub-bands per level are ordered (horizontal, vertical,
diagonal) with row-major locations; ``h`` holds detail along the second
axis, ``v`` along the first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

__all__ = [
    "Family",
    "Boundary",
    "WaveletBasis",
    "CoefficientVector",
    "GridFunction",
    "ConfigurationError",
    "synthesize",
    "analyze",
    "besov_norm",
    "evaluate_at",
    "grid_points",
    "write_grid_csv",
    "read_grid_csv",
    "write_coeff_csv",
    "read_coeff_csv",
]

SQRT2 = np.sqrt(2.0)

HAAR_LO = (0.7071067811865476, 0.7071067811865476)

# Symmlet-8 scaling filter, least-asymmetric spectral factor of the
# order-8 Daubechies product filter.  Regenerate: scripts/derive_sym8.py
SYM8_LO = (
    -0.003382415951005,
    -0.0005421323318000052,
    0.03169508781152595,
    0.007607487324976632,
    -0.14329423835127258,
    -0.061273359067810805,
    0.4813596512590532,
    0.7771857516996284,
    0.3644418948361785,
    -0.051945838107881726,
    -0.027219029917103375,
    0.049137179673730165,
    0.0038087520138945373,
    -0.014952258337062185,
    -0.0003029205147241357,
    0.001889950332767687,
)


class ConfigurationError(ValueError):
    """Basis/grid mismatch or an unbuildable basis."""


class Family(str, Enum):
    HAAR = "haar"
    SYMMLET8 = "symmlet8"


class Boundary(str, Enum):
    SYMMETRIC = "symmetric"
    PERIODIC = "periodic"


def scaling_filter(family: Family) -> np.ndarray:
    if family == Family.HAAR:
        return np.asarray(HAAR_LO)
    return np.asarray(SYM8_LO)


def _detail_filter(h: np.ndarray) -> np.ndarray:
    n = np.arange(len(h))
    return ((-1.0) ** n) * h[::-1]


def _periodic_rows(filt: np.ndarray, n: int) -> np.ndarray:
    """Even translates of a filter wrapped modulo n."""
    rows = np.zeros((n // 2, n))
    for k in range(n // 2):
        for j, v in enumerate(filt):
            rows[k, (2 * k + j) % n] += v
    return rows


def _truncated_row(filt: np.ndarray, n: int, k: int) -> np.ndarray:
    """Translate of a filter at position 2k, restricted to [0, n)."""
    row = np.zeros(n)
    for j, v in enumerate(filt):
        pos = 2 * k + j
        if 0 <= pos < n:
            row[pos] = v
    return row


def _loewdin(rows: np.ndarray) -> np.ndarray:
    """Closest orthonormal row set (symmetric orthogonalization)."""
    gram = rows @ rows.T
    if np.max(np.abs(gram - np.eye(rows.shape[0]))) < 1e-14:
        return rows
    evals, evecs = np.linalg.eigh(gram)
    if evals.min() <= 1e-9:
        raise ConfigurationError("rank-deficient row set in Loewdin step")
    return (evecs * (1.0 / np.sqrt(evals))) @ evecs.T @ rows


def _periodic_level(h: np.ndarray, n: int) -> np.ndarray:
    m = np.vstack([_periodic_rows(h, n), _periodic_rows(_detail_filter(h), n)])
    return _loewdin(m)


class _MGS:
    """Modified Gram-Schmidt accumulator with rank-deficiency skipping."""

    def __init__(self, n: int, seed_rows: np.ndarray | None = None):
        self._rows = np.zeros((n, n))
        self._k = 0
        if seed_rows is not None:
            self._rows[: seed_rows.shape[0]] = seed_rows
            self._k = seed_rows.shape[0]

    def residual(self, row: np.ndarray) -> np.ndarray:
        q = self._rows[: self._k]
        r = row - q.T @ (q @ row)
        return r - q.T @ (q @ r)

    def accept(self, row: np.ndarray, tol: float = 1e-8) -> np.ndarray | None:
        r = self.residual(row)
        norm = np.linalg.norm(r)
        if norm < tol * max(1.0, np.linalg.norm(row)):
            return None
        r /= norm
        self._rows[self._k] = r
        self._k += 1
        return r


def _take_block(
    mgs: _MGS, count: int, candidates, fallback_positions, n: int
) -> list[np.ndarray]:
    """Accept `count` orthonormal vectors, preferring the candidate list
    and completing from coordinate vectors at the given positions."""
    out = []
    for cand in candidates:
        if len(out) == count:
            return out
        r = mgs.accept(cand)
        if r is not None:
            out.append(r)
    for pos in fallback_positions:
        if len(out) == count:
            return out
        e = np.zeros(n)
        e[pos] = 1.0
        r = mgs.accept(e)
        if r is not None:
            out.append(r)
    if len(out) != count:
        raise ConfigurationError("failed to complete boundary block")
    return out


def _interval_level(
    h: np.ndarray, n: int, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Boundary-adapted one-level map with the target columns (cascaded
    polynomial samples) reproduced exactly by the scaling block.

    Interior filter translates are kept verbatim; per edge, `B` scaling
    slots hold the localized residuals of the targets (plus spare
    translate tails), so sampled polynomials lie in the scaling span and
    every detail row annihilates them by orthogonality.
    """
    M = len(h)
    g = _detail_filter(h)
    half = n // 2
    B = min(M // 2, n // 8)
    ni = half - 2 * B
    navail = half - (M // 2 - 1)
    start = (navail - ni) // 2
    interior_h = np.array([_truncated_row(h, n, k) for k in range(start, start + ni)])

    # scaling boundary blocks: target residuals split by edge, then spare
    # translate tails (left-crossing / dropped / right-crossing)
    coef = interior_h @ targets
    resid = targets - interior_h.T @ coef
    left_mask = np.arange(n) < n // 2
    res_left = [resid[:, p] * left_mask for p in range(targets.shape[1])]
    res_right = [resid[:, p] * ~left_mask for p in range(targets.shape[1])]
    tails_left = [_truncated_row(h, n, k) for k in range(-(M // 2 - 1), start)]
    tails_right = [_truncated_row(h, n, k) for k in range(start + ni, half)]

    mgs = _MGS(n, interior_h)
    s_left = _take_block(mgs, B, res_left + tails_left, range(n), n)
    s_right = _take_block(
        mgs, B, res_right + tails_right, range(n - 1, -1, -1), n
    )

    # detail rows: interior translates are exact; edge slots come from
    # translate tails of the detail filter, orthogonalized against V
    interior_g = [_truncated_row(g, n, k) for k in range(start, start + ni)]
    d_interior = []
    for row in interior_g:
        r = mgs.accept(row)
        if r is None:
            raise ConfigurationError("interior detail row degenerated")
        d_interior.append(r)
    gtails_left = [_truncated_row(g, n, k) for k in range(-(M // 2 - 1), start)]
    gtails_right = [_truncated_row(g, n, k) for k in range(start + ni, half)]
    d_left = _take_block(mgs, B, gtails_left, range(n), n)
    d_right = _take_block(mgs, B, gtails_right, range(n - 1, -1, -1), n)

    m = np.vstack(
        [s_left, interior_h, s_right, d_left, d_interior, d_right]
    )
    m = _loewdin(m)
    if np.max(np.abs(m @ m.T - np.eye(n))) > 1e-12:
        raise ConfigurationError(f"interval bank not orthonormal at size {n}")
    new_targets = m[:half] @ targets
    norms = np.linalg.norm(new_targets, axis=0)
    return m, new_targets / np.where(norms > 0, norms, 1.0)


def _build_stack(h: np.ndarray, levels: int, boundary: Boundary) -> tuple:
    """Analysis matrices for sizes 2^levels down to 2, finest first."""
    mats = []
    if boundary == Boundary.SYMMETRIC and len(h) > 2:
        n0 = 2 ** levels
        t = np.arange(n0, dtype=float)
        targets = np.polynomial.chebyshev.chebvander(
            2.0 * t / (n0 - 1) - 1.0, len(h) // 2 - 1
        )
        targets /= np.linalg.norm(targets, axis=0)
        for j in range(levels, 0, -1):
            n = 2 ** j
            if n >= 2 * len(h):
                mat, targets = _interval_level(h, n, targets)
            else:
                mat = _periodic_level(h, n)
                targets = mat[: n // 2] @ targets
            mats.append(mat)
        return tuple(mats)
    return tuple(_periodic_level(h, 2 ** j) for j in range(levels, 0, -1))


@lru_cache(maxsize=32)
def _level_stack(family: Family, boundary: Boundary, levels: int) -> tuple:
    return _build_stack(scaling_filter(family), levels, boundary)


@dataclass(frozen=True)
class WaveletBasis:
    """Orthonormal wavelet basis on the dyadic grid of [0,1]^d.

    ``max_level`` J fixes the grid (2^J points per axis); ``truncation``
    L is the number of retained single-index coefficients.
    """

    family: Family = Family.SYMMLET8
    boundary: Boundary = Boundary.SYMMETRIC
    dimension: int = 1
    max_level: int = 10
    truncation: int | None = None

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigurationError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.max_level < 1:
            raise ConfigurationError("max_level must be >= 1")
        if self.truncation is None:
            object.__setattr__(self, "truncation", self.grid_size)
        if not 1 <= self.truncation <= self.grid_size:
            raise ConfigurationError(
                f"truncation L={self.truncation} must lie in [1, {self.grid_size}]"
            )

    @property
    def grid_size(self) -> int:
        return 2 ** (self.max_level * self.dimension)

    @property
    def points_per_axis(self) -> int:
        return 2 ** self.max_level

    def _levels(self) -> tuple:
        return _level_stack(self.family, self.boundary, self.max_level)

    def index_map(self) -> list[tuple[int, int, str]]:
        """(level, location, subband) for each single index l=1..grid_size."""
        out = [(0, 0, "a")]
        if self.dimension == 1:
            for j in range(1, self.max_level + 1):
                out.extend((j, k, "d") for k in range(2 ** (j - 1)))
        else:
            for j in range(1, self.max_level + 1):
                m = 2 ** (j - 1)
                for band in ("h", "v", "d"):
                    out.extend((j, k, band) for k in range(m * m))
        return out

    # -- full analysis in single-index order ------------------------------

    def _analyze_full(self, values: np.ndarray) -> np.ndarray:
        mats = self._levels()
        if self.dimension == 1:
            x = values.copy()
            for mat in mats:
                n = mat.shape[0]
                x[:n] = mat @ x[:n]
            return self._pack_1d(x)
        x = values.reshape(self.points_per_axis, -1).copy()
        for mat in mats:
            n = mat.shape[0]
            x[:n, :n] = mat @ x[:n, :n] @ mat.T
        return self._pack_2d(x)

    def _synthesize_full(self, coeffs: np.ndarray) -> np.ndarray:
        mats = self._levels()
        if self.dimension == 1:
            x = self._unpack_1d(coeffs)
            for mat in mats[::-1]:
                n = mat.shape[0]
                x[:n] = mat.T @ x[:n]
            return x
        x = self._unpack_2d(coeffs)
        for mat in mats[::-1]:
            n = mat.shape[0]
            x[:n, :n] = mat.T @ x[:n, :n] @ mat
        return x.reshape(-1)

    def _pack_1d(self, x: np.ndarray) -> np.ndarray:
        # cascade leaves [a | d_fine...] interleaved by halves; reorder
        # coarse-to-fine: a, d(size1), d(size2), ..., d(size N/2)
        out = np.empty_like(x)
        out[0] = x[0]
        pos = 1
        for j in range(1, self.max_level + 1):
            m = 2 ** (j - 1)
            out[pos:pos + m] = x[m:2 * m]
            pos += m
        return out

    def _unpack_1d(self, c: np.ndarray) -> np.ndarray:
        x = np.empty_like(c)
        x[0] = c[0]
        pos = 1
        for j in range(1, self.max_level + 1):
            m = 2 ** (j - 1)
            x[m:2 * m] = c[pos:pos + m]
            pos += m
        return x

    def _pack_2d(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.size)
        out[0] = x[0, 0]
        pos = 1
        for j in range(1, self.max_level + 1):
            m = 2 ** (j - 1)
            for blk in (x[:m, m:2 * m], x[m:2 * m, :m], x[m:2 * m, m:2 * m]):
                out[pos:pos + m * m] = blk.reshape(-1)
                pos += m * m
        return out

    def _unpack_2d(self, c: np.ndarray) -> np.ndarray:
        n = self.points_per_axis
        x = np.empty((n, n))
        x[0, 0] = c[0]
        pos = 1
        for j in range(1, self.max_level + 1):
            m = 2 ** (j - 1)
            for sl in ((slice(0, m), slice(m, 2 * m)),
                       (slice(m, 2 * m), slice(0, m)),
                       (slice(m, 2 * m), slice(m, 2 * m))):
                x[sl] = c[pos:pos + m * m].reshape(m, m)
                pos += m * m
        return x


@dataclass
class CoefficientVector:
    """Wavelet coefficients in deterministic single-index order."""

    values: np.ndarray
    basis: WaveletBasis

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.basis.truncation,):
            raise ConfigurationError(
                f"expected {self.basis.truncation} coefficients, "
                f"got shape {self.values.shape}"
            )

    def index_map(self) -> list[tuple[int, int, str]]:
        return self.basis.index_map()[: self.basis.truncation]


@dataclass
class GridFunction:
    """Function values on the dyadic midpoint grid, row-major for d=2."""

    values: np.ndarray
    dimension: int
    max_level: int
    value_range_unit: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = 2 ** (self.max_level * self.dimension)
        if self.values.shape != (n,):
            raise ConfigurationError(
                f"expected {n} grid values for d={self.dimension}, "
                f"J={self.max_level}, got shape {self.values.shape}"
            )
        if self.value_range_unit and (
            np.min(self.values) < 0.0 or np.max(self.values) > 1.0
        ):
            raise ValueError("value_range flag set but values leave [0,1]")

    @property
    def grid_size(self) -> int:
        return self.values.size


def grid_points(dimension: int, max_level: int) -> np.ndarray:
    """Midpoint grid nodes; shape (2^(Jd), d), row-major for d=2."""
    n = 2 ** max_level
    axis = (2.0 * np.arange(n) + 1.0) / (2.0 * n)
    if dimension == 1:
        return axis[:, None]
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([x1.ravel(), x2.ravel()])


def synthesize(coeffs: CoefficientVector) -> GridFunction:
    """Grid values of the truncated wavelet series sum_l w_l psi_l."""
    basis = coeffs.basis
    full = np.zeros(basis.grid_size)
    full[: basis.truncation] = coeffs.values
    values = basis._synthesize_full(full) * np.sqrt(basis.grid_size)
    return GridFunction(values, basis.dimension, basis.max_level)


def analyze(f: GridFunction, basis: WaveletBasis) -> CoefficientVector:
    """First L wavelet coefficients of a grid function."""
    if f.dimension != basis.dimension or f.max_level != basis.max_level:
        raise ConfigurationError(
            f"grid (d={f.dimension}, J={f.max_level}) does not match basis "
            f"(d={basis.dimension}, J={basis.max_level})"
        )
    full = basis._analyze_full(f.values) / np.sqrt(basis.grid_size)
    return CoefficientVector(full[: basis.truncation], basis)


def besov_norm(coeffs: CoefficientVector, alpha: float, p: float) -> float:
    """Weighted sequence norm (sum_l l^{p(alpha/d+1/2)-1} |w_l|^p)^(1/p),
    or sup_l l^{alpha/d+1/2} |w_l| for p = inf."""
    if alpha < 0:
        raise ValueError(f"regularity alpha must be >= 0, got {alpha}")
    if p < 1:
        raise ValueError(f"integrability p must be >= 1, got {p}")
    d = coeffs.basis.dimension
    l = np.arange(1, coeffs.values.size + 1, dtype=float)
    w = np.abs(coeffs.values)
    if np.isinf(p):
        return float(np.max(l ** (alpha / d + 0.5) * w))
    s = np.sum(l ** (p * (alpha / d + 0.5) - 1.0) * w ** p)
    return float(s ** (1.0 / p))


def evaluate_at(
    f: GridFunction, points: np.ndarray, mode: str = "nearest"
) -> np.ndarray:
    """Evaluate a grid function at points of [0,1]^d.

    ``nearest`` returns the value of the containing dyadic cell;
    ``linear`` interpolates multilinearly between midpoint nodes with
    constant extrapolation past the outermost midpoints.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != f.dimension:
        raise ConfigurationError(
            f"points have dimension {pts.shape[1]}, grid has {f.dimension}"
        )
    if np.min(pts) < 0.0 or np.max(pts) > 1.0:
        raise ValueError("points must lie in [0,1]^d")
    n = 2 ** f.max_level
    if mode == "nearest":
        idx = np.clip(np.floor(pts * n).astype(np.int64), 0, n - 1)
        if f.dimension == 1:
            return f.values[idx[:, 0]]
        return f.values[idx[:, 0] * n + idx[:, 1]]
    if mode != "linear":
        raise ValueError(f"unknown evaluation mode {mode!r}")
    # position in units of node index: node i sits at (2i+1)/(2n)
    t = pts * n - 0.5
    lo = np.clip(np.floor(t).astype(np.int64), 0, n - 1)
    hi = np.clip(lo + 1, 0, n - 1)
    frac = np.clip(t - lo, 0.0, 1.0)
    if f.dimension == 1:
        return (1 - frac[:, 0]) * f.values[lo[:, 0]] + frac[:, 0] * f.values[hi[:, 0]]
    v = f.values
    f00 = v[lo[:, 0] * n + lo[:, 1]]
    f01 = v[lo[:, 0] * n + hi[:, 1]]
    f10 = v[hi[:, 0] * n + lo[:, 1]]
    f11 = v[hi[:, 0] * n + hi[:, 1]]
    a, b = frac[:, 0], frac[:, 1]
    return (
        (1 - a) * (1 - b) * f00
        + (1 - a) * b * f01
        + a * (1 - b) * f10
        + a * b * f11
    )


# -- CSV formats -----------------------------------------------------------

def write_grid_csv(f: GridFunction, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# d={f.dimension} J={f.max_level}\n")
        for v in f.values:
            fh.write(f"{float(v)!r}\n")


def read_grid_csv(path) -> GridFunction:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"missing grid header in {path}")
        meta = dict(tok.split("=") for tok in header[1:].split())
        values = np.array([float(line) for line in fh if line.strip()])
    return GridFunction(values, int(meta["d"]), int(meta["J"]))


def write_coeff_csv(c: CoefficientVector, path) -> None:
    b = c.basis
    with open(path, "w") as fh:
        fh.write(
            f"# family={b.family.value} boundary={b.boundary.value} "
            f"d={b.dimension} J={b.max_level} L={b.truncation}\n"
        )
        fh.write("l,j,k,subband,value\n")
        for l, ((j, k, band), v) in enumerate(zip(c.index_map(), c.values), start=1):
            fh.write(f"{l},{j},{k},{band},{float(v)!r}\n")


def read_coeff_csv(path) -> CoefficientVector:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"missing coefficient header in {path}")
        meta = dict(tok.split("=") for tok in header[1:].split())
        fh.readline()  # column names
        values = [float(line.split(",")[4]) for line in fh if line.strip()]
    basis = WaveletBasis(
        family=Family(meta["family"]),
        boundary=Boundary(meta["boundary"]),
        dimension=int(meta["d"]),
        max_level=int(meta["J"]),
        truncation=int(meta["L"]),
    )
    return CoefficientVector(np.array(values), basis)
