"""Uniform cell-centered square grid: fields, Neumann operators, functionals,
implicit Helmholtz solves and Neumann-compatible cosine test fields.

All fields live at cell centers ((i+1/2)h, (j+1/2)h) of an n x n grid on
(0,L)^2, indexed values[i, j] with i along x and j along y.  No-flux boundary
conditions are realized by mirror ghost cells, which makes boundary-normal
gradient faces exactly zero and constants exact steady states of every
operator in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft


class GridError(Exception):
    """Base class for grid-level failures."""


class GridMismatch(GridError):
    """Operands live on different grids."""


class NonPositiveField(GridError):
    """A functional requiring strict positivity met a value <= 0."""


class InvalidExponent(GridError):
    """Lp norm requested with p < 1."""


class SolveFailure(GridError):
    """Implicit solve did not reach the residual tolerance."""


class UnresolvableMode(GridError):
    """Requested cosine mode is not resolvable on this grid."""


HELMHOLTZ_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Square domain (0,L)^2 split into n x n cells; h is derived, never stored."""

    L: float
    n: int

    def __post_init__(self):
        if not (self.L > 0):
            raise ValueError(f"side length must be positive, got L={self.L}")
        if self.n < 8:
            raise ValueError(f"need at least 8 cells per side, got n={self.n}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def area(self) -> float:
        return self.L * self.L

    def cell_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (x, y) of cell-center coordinates, shape (n, n)."""
        c = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(c, c, indexing="ij")


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"field shape {self.values.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def transpose(self) -> "ScalarField":
        """The square-symmetry image u(x,y) -> u(y,x)."""
        return ScalarField(self.grid, self.values.T.copy())


@dataclass
class VectorField:
    """Face-staggered vector field: fx on x-normal faces (n+1, n), fy on
    y-normal faces (n, n+1).  Boundary-normal components must vanish."""

    grid: GridSpec
    fx: np.ndarray
    fy: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        self.fx = np.asarray(self.fx, dtype=float)
        self.fy = np.asarray(self.fy, dtype=float)
        if self.fx.shape != (n + 1, n) or self.fy.shape != (n, n + 1):
            raise ValueError("staggered component shapes do not match grid")
        if (
            np.any(self.fx[0] != 0.0)
            or np.any(self.fx[-1] != 0.0)
            or np.any(self.fy[:, 0] != 0.0)
            or np.any(self.fy[:, -1] != 0.0)
        ):
            raise ValueError("boundary-normal face components must be zero (no-flux)")

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(self.fx))), float(np.max(np.abs(self.fy))))


def _same_grid(*fields) -> GridSpec:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatch("operands live on different grids")
    return g


# ---------------------------------------------------------------------------
# Differential operators
# ---------------------------------------------------------------------------

def gradient(u: ScalarField) -> VectorField:
    g = u.grid
    h = g.h
    fx = np.zeros((g.n + 1, g.n))
    fy = np.zeros((g.n, g.n + 1))
    fx[1:-1, :] = np.diff(u.values, axis=0) / h
    fy[:, 1:-1] = np.diff(u.values, axis=1) / h
    return VectorField(g, fx, fy)


def divergence(F: VectorField) -> ScalarField:
    h = F.grid.h
    vals = (np.diff(F.fx, axis=0) + np.diff(F.fy, axis=1)) / h
    return ScalarField(F.grid, vals)


def laplacian(u: ScalarField) -> ScalarField:
    # Defined as div(grad(u)) so the discrete compatibility holds identically.
    return divergence(gradient(u))


# ---------------------------------------------------------------------------
# Integral functionals (midpoint quadrature: cell value x h^2)
# ---------------------------------------------------------------------------

def integral(u: ScalarField) -> float:
    return float(np.sum(u.values)) * u.grid.h ** 2


def mean(u: ScalarField) -> float:
    return integral(u) / u.grid.area


def lp_norm(u: ScalarField, p: float) -> float:
    if p != math.inf and p < 1:
        raise InvalidExponent(f"Lp norm needs p >= 1, got p={p}")
    if p == math.inf:
        return float(np.max(np.abs(u.values)))
    return float(np.sum(np.abs(u.values) ** p) * u.grid.h ** 2) ** (1.0 / p)


def osc(u: ScalarField) -> float:
    """Oscillation max(u) - min(u), exact over cells."""
    return float(np.max(u.values) - np.min(u.values))


def _face_means(u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic means of the two cells adjacent to each interior face."""
    v = u.values
    return 0.5 * (v[1:, :] + v[:-1, :]), 0.5 * (v[:, 1:] + v[:, :-1])


def fisher(u: ScalarField) -> float:
    """int |grad u|^2 / u with u evaluated at faces by arithmetic mean."""
    if np.min(u.values) <= 0.0:
        raise NonPositiveField("fisher functional requires u > 0 everywhere")
    F = gradient(u)
    ufx, ufy = _face_means(u)
    h2 = u.grid.h ** 2
    return float(
        (np.sum(F.fx[1:-1, :] ** 2 / ufx) + np.sum(F.fy[:, 1:-1] ** 2 / ufy)) * h2
    )


def _grad_sq_cells(u: ScalarField) -> np.ndarray:
    """|grad u|^2 at cell centers: average of squared adjacent face gradients."""
    F = gradient(u)
    gx2 = 0.5 * (F.fx[:-1, :] ** 2 + F.fx[1:, :] ** 2)
    gy2 = 0.5 * (F.fy[:, :-1] ** 2 + F.fy[:, 1:] ** 2)
    return gx2 + gy2


def grad_l2sq(u: ScalarField) -> float:
    return float(np.sum(_grad_sq_cells(u))) * u.grid.h ** 2


def grad_l1(u: ScalarField) -> float:
    return float(np.sum(np.sqrt(_grad_sq_cells(u)))) * u.grid.h ** 2


def grad4(u: ScalarField) -> float:
    return float(np.sum(_grad_sq_cells(u) ** 2)) * u.grid.h ** 2


def laplacian_l2sq(u: ScalarField) -> float:
    lap = laplacian(u)
    return float(np.sum(lap.values ** 2)) * u.grid.h ** 2


# ---------------------------------------------------------------------------
# Implicit Helmholtz solve
# ---------------------------------------------------------------------------

def dct_laplacian_symbol(grid: GridSpec, j: int, k: int = 0) -> float:
    """Eigenvalue of the discrete Neumann Laplacian on the cosine mode (j,k)."""
    s = lambda m: (4.0 / grid.h ** 2) * math.sin(math.pi * m / (2 * grid.n)) ** 2
    return -(s(j) + s(k))


def helmholtz_solve(rhs: ScalarField, d: float, lam: float, dt: float) -> ScalarField:
    """Solve (1 + dt*lam) u - dt*d*Lap_h u = rhs under discrete Neumann
    conditions by cosine-basis diagonalization; checked to 1e-10 relative
    residual."""
    if d < 0 or lam < 0 or dt <= 0:
        raise ValueError("need d >= 0, lam >= 0, dt > 0")
    if 1.0 + dt * lam <= 0:
        raise ValueError("1 + dt*lam must be positive")
    g = rhs.grid
    j = np.arange(g.n)
    s = (4.0 / g.h ** 2) * np.sin(np.pi * j / (2 * g.n)) ** 2
    denom = (1.0 + dt * lam) + dt * d * (s[:, None] + s[None, :])
    rh = _fft.dctn(rhs.values, type=2, norm="ortho")
    u = ScalarField(g, _fft.idctn(rh / denom, type=2, norm="ortho"))

    applied = (1.0 + dt * lam) * u.values - dt * d * laplacian(u).values
    scale = max(float(np.linalg.norm(rhs.values)), np.finfo(float).tiny)
    rel = float(np.linalg.norm(applied - rhs.values)) / scale
    if rel > HELMHOLTZ_TOL:
        raise SolveFailure(f"Helmholtz residual {rel:.3e} exceeds {HELMHOLTZ_TOL}")
    return u


# ---------------------------------------------------------------------------
# Cosine test fields
# ---------------------------------------------------------------------------

def cosine_mode(grid: GridSpec, j: int, k: int, amplitude: float = 1.0) -> ScalarField:
    """amplitude * cos(j pi x / L) cos(k pi y / L) sampled at cell centers."""
    x, y = grid.cell_coords()
    vals = amplitude * np.cos(j * np.pi * x / grid.L) * np.cos(k * np.pi * y / grid.L)
    return ScalarField(grid, vals)


def sample_cosine_field(
    seed: int, max_mode: int, amplitude: float, grid: GridSpec
) -> tuple[ScalarField, np.ndarray]:
    """Deterministic pseudo-random Neumann-compatible cosine sum.

    Returns the gridded samples together with the exact coefficient table
    a[j, k], 0 <= j, k <= max_mode, each uniform in [-amplitude, amplitude],
    so spectrally exact derivatives remain available downstream.
    """
    if max_mode < 0:
        raise ValueError("max_mode must be >= 0")
    if amplitude <= 0:
        raise ValueError("amplitude must be > 0")
    if max_mode >= grid.n / 2:
        raise UnresolvableMode(
            f"max_mode={max_mode} is not resolvable on n={grid.n} cells"
        )
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-amplitude, amplitude, size=(max_mode + 1, max_mode + 1))
    c = (np.arange(grid.n) + 0.5) / grid.n  # cell centers scaled to (0,1)
    modes = np.cos(np.pi * np.outer(np.arange(max_mode + 1), c))  # (m+1, n)
    vals = modes.T @ coeffs @ modes
    return ScalarField(grid, vals), coeffs


def spectral_hessian_norms(coeffs: np.ndarray, L: float) -> dict[str, float]:
    """Exact mode sums of ||u_xx||_2^2, ||u_yy||_2^2, ||u_xy||_2^2 and
    ||Lap u||_2^2 for a cosine sum with the given coefficient table."""
    m = coeffs.shape[0] - 1
    idx = np.arange(m + 1)
    wc = np.where(idx == 0, 1.0, 0.5)  # int cos^2 over (0,L) / L
    ws = np.where(idx == 0, 0.0, 0.5)  # int sin^2 over (0,L) / L
    k2 = (idx * np.pi / L) ** 2
    a2 = coeffs ** 2
    area = L * L
    uxx = area * float(np.sum(k2[:, None] ** 2 * a2 * wc[:, None] * wc[None, :]))
    uyy = area * float(np.sum(k2[None, :] ** 2 * a2 * wc[:, None] * wc[None, :]))
    uxy = area * float(
        np.sum(k2[:, None] * k2[None, :] * a2 * ws[:, None] * ws[None, :])
    )
    lap = area * float(
        np.sum((k2[:, None] + k2[None, :]) ** 2 * a2 * wc[:, None] * wc[None, :])
    )
    return {"uxx": uxx, "uyy": uyy, "uxy": uxy, "laplacian": lap}


# ---------------------------------------------------------------------------
# Field snapshot files
# ---------------------------------------------------------------------------

_HEADER_PREFIX = "hotspotfield v1"


def write_field(path, u: ScalarField) -> None:
    """Write the snapshot format: header line, then n lines of n values
    (row-major, y increasing)."""
    g = u.grid
    with open(path, "w") as fh:
        fh.write(f"{_HEADER_PREFIX} L={g.L!r} n={g.n}\n")
        for j in range(g.n):
            fh.write(" ".join(repr(float(v)) for v in u.values[:, j]) + "\n")


def read_field(path, grid: GridSpec | None = None) -> ScalarField:
    """Read a snapshot file; accepts the headered format or headerless CSV
    (the latter needs an explicit grid to supply L)."""
    with open(path) as fh:
        first = fh.readline()
        if first.startswith(_HEADER_PREFIX):
            tokens = dict(t.split("=") for t in first.strip().split()[2:])
            L, n = float(tokens["L"]), int(tokens["n"])
            file_grid = GridSpec(L, n)
            if grid is not None and (grid.n != n or grid.L != L):
                raise GridMismatch(
                    f"file grid (L={L}, n={n}) does not match expected grid"
                )
            rows = [
                np.array(fh.readline().split(), dtype=float) for _ in range(n)
            ]
        else:
            if grid is None:
                raise ValueError("headerless CSV needs an explicit GridSpec")
            file_grid = grid
            sep = "," if "," in first else None
            rows = [np.array(first.split(sep), dtype=float)]
            for _ in range(grid.n - 1):
                rows.append(np.array(fh.readline().split(sep), dtype=float))
    vals = np.vstack(rows)
    if vals.shape != (file_grid.n, file_grid.n):
        raise ValueError(f"expected {file_grid.n}x{file_grid.n} values, got {vals.shape}")
    return ScalarField(file_grid, vals.T.copy())
