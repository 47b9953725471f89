"""Dirichlet Poisson problems on intervals and squares with Gaussian solutions.

Point coordinates are kept as exact :class:`fractions.Fraction` values so
that boundary membership is decided exactly; they are rounded into a
precision context only when a kernel or the manufactured solution is
evaluated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2

from ._validation import as_fraction
from .precision import BigScalar, PrecisionContext

Point = tuple  # tuple[Fraction, ...]

# denominator constant of the Gaussian family, exp(-(sigma/2.1)|x|^2)
GAUSSIAN_DENOMINATOR = Fraction(21, 10)


@dataclass(frozen=True)
class Domain:
    """``[a, b]`` (``kind="interval"``) or ``[a, b]**2`` (``kind="square"``)."""

    kind: str
    a: Fraction
    b: Fraction

    def __post_init__(self):
        if self.kind not in ("interval", "square"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "a", as_fraction(self.a))
        object.__setattr__(self, "b", as_fraction(self.b))
        if not self.a < self.b:
            raise ValueError(f"domain needs a < b, got a={self.a}, b={self.b}")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    def diameter(self, ctx: PrecisionContext) -> BigScalar:
        """``b - a`` for intervals, ``(b - a) sqrt(2)`` for squares."""
        side = ctx.scalar(self.b - self.a)
        return side if self.dim == 1 else side * ctx.scalar(2).sqrt()

    def contains(self, p: Point) -> bool:
        return len(p) == self.dim and all(self.a <= x <= self.b for x in p)

    def on_boundary(self, p: Point) -> bool:
        return any(x == self.a or x == self.b for x in p)


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid with ``points_per_axis`` nodes per axis, endpoints included."""

    points_per_axis: int

    def __post_init__(self):
        if int(self.points_per_axis) != self.points_per_axis or self.points_per_axis < 3:
            raise ValueError(f"points_per_axis must be an integer >= 3, got {self.points_per_axis}")

    def spacing(self, domain: Domain) -> Fraction:
        return (domain.b - domain.a) / (self.points_per_axis - 1)

    def fill_distance(self, domain: Domain, ctx: PrecisionContext) -> BigScalar:
        """Half the spacing in 1D, half the cell diagonal in 2D."""
        h = ctx.scalar(self.spacing(domain) / 2)
        return h if domain.dim == 1 else h * ctx.scalar(2).sqrt()

    def total(self, domain: Domain) -> int:
        return self.points_per_axis ** domain.dim


@dataclass(frozen=True)
class ManufacturedGaussian:
    """``u(x) = exp(-(sigma/2.1) |x|^2)`` with ``f = Laplacian(u)`` and ``g = u``."""

    sigma: Fraction

    def __post_init__(self):
        object.__setattr__(self, "sigma", as_fraction(self.sigma))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def rate(self) -> Fraction:
        return self.sigma / GAUSSIAN_DENOMINATOR

    # the *_mp helpers take mpfr coordinates and assume ctx.local() is active
    def exact_mp(self, r2, rate):
        return gmpy2.exp(-rate * r2)

    def laplacian_mp(self, r2, rate, dim: int):
        # exp(-k r^2) [ (2k)^2 r^2 - 2 k dim ]
        two_k = 2 * rate
        return gmpy2.exp(-rate * r2) * (two_k * two_k * r2 - two_k * dim)

    def exact(self, point: Sequence, ctx: PrecisionContext) -> BigScalar:
        with ctx.local():
            r2 = _norm2(point, ctx)
            return BigScalar(self.exact_mp(r2, ctx.mpfr(self.rate)), ctx)

    def laplacian(self, point: Sequence, ctx: PrecisionContext) -> BigScalar:
        with ctx.local():
            r2 = _norm2(point, ctx)
            return BigScalar(self.laplacian_mp(r2, ctx.mpfr(self.rate), len(point)), ctx)


def _norm2(point: Sequence, ctx: PrecisionContext):
    s = gmpy2.mpfr(0)
    for x in point:
        v = ctx.mpfr(x)
        s += v * v
    return s


# ---------------------------------------------------------------------------
# point generation

def _axis(domain: Domain, count: int) -> list[Fraction]:
    step = (domain.b - domain.a) / (count - 1)
    return [domain.a + step * i for i in range(count)]


def generate_grid(domain: Domain, grid: GridSpec) -> tuple[list[Point], list[Point]]:
    """Uniform grid split into (interior, boundary), each in lexicographic order."""
    axis = _axis(domain, grid.points_per_axis)
    if domain.dim == 1:
        pts = [(x,) for x in axis]
    else:
        pts = [(x, y) for x in axis for y in axis]
    interior = [p for p in pts if not domain.on_boundary(p)]
    boundary = [p for p in pts if domain.on_boundary(p)]
    return interior, boundary


def generate_test_points(domain: Domain, count_domain: int,
                         count_boundary: int) -> tuple[list[Point], list[Point]]:
    """Evaluation points over the closed domain and on its boundary.

    1D: ``count_domain`` evenly spaced points over ``[a, b]`` including both
    ends; the boundary set is the two endpoints (``count_boundary`` must be 2).
    2D: a ``sqrt(count_domain)``-per-axis tensor grid over the closed square;
    boundary points are ``count_boundary / 4`` per side, evenly spaced along
    the perimeter starting at each side's first corner, so every corner
    appears exactly once.
    """
    if domain.dim == 1:
        if count_domain < 2:
            raise ValueError("need at least 2 domain test points")
        if count_boundary != 2:
            raise ValueError("an interval has exactly 2 boundary test points")
        return [(x,) for x in _axis(domain, count_domain)], [(domain.a,), (domain.b,)]

    side = _isqrt_exact(count_domain)
    if side is None or side < 2:
        raise ValueError(f"2D domain test count must be a perfect square >= 4, got {count_domain}")
    if count_boundary < 4 or count_boundary % 4:
        raise ValueError(f"2D boundary test count must be a positive multiple of 4, got {count_boundary}")
    axis = _axis(domain, side)
    tests = [(x, y) for x in axis for y in axis]
    per_side = count_boundary // 4
    a, b = domain.a, domain.b
    step = (b - a) / per_side
    bdy = []
    bdy += [(a + step * i, a) for i in range(per_side)]   # bottom, left to right
    bdy += [(b, a + step * i) for i in range(per_side)]   # right, bottom to top
    bdy += [(b - step * i, b) for i in range(per_side)]   # top, right to left
    bdy += [(a, b - step * i) for i in range(per_side)]   # left, top to bottom
    return tests, bdy


def _isqrt_exact(n: int):
    import math
    if n < 0:
        return None
    r = math.isqrt(n)
    return r if r * r == n else None


# ---------------------------------------------------------------------------
# problems

@dataclass(frozen=True)
class CollocationProblem:
    """A Dirichlet Poisson problem with a manufactured Gaussian solution."""

    domain: Domain
    grid: GridSpec
    solution: ManufacturedGaussian
    n_test_domain: int
    n_test_boundary: int
    name: str = "custom"
    interior: list = field(default=None, compare=False, repr=False)
    boundary: list = field(default=None, compare=False, repr=False)
    tests_domain: list = field(default=None, compare=False, repr=False)
    tests_boundary: list = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.interior is None or self.boundary is None:
            interior, boundary = generate_grid(self.domain, self.grid)
            object.__setattr__(self, "interior", interior)
            object.__setattr__(self, "boundary", boundary)
        if self.tests_domain is None or self.tests_boundary is None:
            td, tb = generate_test_points(self.domain, self.n_test_domain, self.n_test_boundary)
            object.__setattr__(self, "tests_domain", td)
            object.__setattr__(self, "tests_boundary", tb)

    @classmethod
    def from_points(cls, domain: Domain, solution: ManufacturedGaussian,
                    interior: list, boundary: list, tests_domain: list,
                    tests_boundary: list, name: str = "custom") -> "CollocationProblem":
        """Problem on explicit point sets (used for small and degenerate cases)."""
        spec = GridSpec(3)
        return cls(domain, spec, solution, len(tests_domain), len(tests_boundary), name,
                   list(interior), list(boundary), list(tests_domain), list(tests_boundary))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def centers(self) -> list:
        """All collocation nodes: interior first, then boundary."""
        return list(self.interior) + list(self.boundary)

    @property
    def n_data(self) -> int:
        return len(self.interior) + len(self.boundary)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "domain": {"kind": self.domain.kind, "a": str(self.domain.a), "b": str(self.domain.b)},
            "points_per_axis": self.grid.points_per_axis,
            "sigma": str(self.solution.sigma),
            "n_data": self.n_data,
            "n_interior": len(self.interior),
            "n_boundary": len(self.boundary),
            "n_test_domain": len(self.tests_domain),
            "n_test_boundary": len(self.tests_boundary),
        }


def rhs_and_boundary(problem: CollocationProblem, point: Point, ctx: PrecisionContext) -> BigScalar:
    """``f(point)`` for interior points and ``g(point)`` on the boundary."""
    p = tuple(as_fraction(x) for x in point)
    if not problem.domain.contains(p):
        raise ValueError(f"point {point} is outside the domain")
    if problem.domain.on_boundary(p):
        return problem.solution.exact(p, ctx)
    return problem.solution.laplacian(p, ctx)


# named problems

PAPER_1D = "paper-1d"
PAPER_2D = "paper-2d"

DEFAULTS = {
    PAPER_1D: {"c0": "120", "digits": 800, "beta": -1},
    # 7000 sqrt(2) 10^14
    PAPER_2D: {"c0": "7000*sqrt2*1e14", "digits": 1200, "beta": -1},
}


def make_problem(name: str = "custom", *, sigma=None, a=None, b=None, dim: int | None = None,
                 points_per_axis: int | None = None, n_test_domain: int | None = None,
                 n_test_boundary: int | None = None) -> CollocationProblem:
    """Build ``paper-1d``, ``paper-2d`` or a custom Gaussian problem.

    Keyword arguments override the named problem's settings.
    """
    if name == PAPER_1D:
        base = dict(sigma=1, a=0, b=10, dim=1, points_per_axis=201, n_test_domain=400, n_test_boundary=2)
    elif name == PAPER_2D:
        base = dict(sigma=Fraction(1, 10**36), a=0, b=10**16, dim=2, points_per_axis=41,
                    n_test_domain=6400, n_test_boundary=800)
    elif name == "custom":
        base = dict(sigma=None, a=None, b=None, dim=None, points_per_axis=None,
                    n_test_domain=None, n_test_boundary=None)
    else:
        raise ValueError(f"unknown problem {name!r}; expected {PAPER_1D!r}, {PAPER_2D!r} or 'custom'")
    given = dict(sigma=sigma, a=a, b=b, dim=dim, points_per_axis=points_per_axis,
                 n_test_domain=n_test_domain, n_test_boundary=n_test_boundary)
    cfg = {k: (given[k] if given[k] is not None else base[k]) for k in base}
    if cfg["dim"] is None:
        raise ValueError("custom problems need dim")
    if cfg["n_test_boundary"] is None and cfg["dim"] == 1:
        cfg["n_test_boundary"] = 2
    missing = [k for k, v in cfg.items() if v is None]
    if missing:
        raise ValueError(f"custom problem is missing {', '.join(missing)}")
    kind = "interval" if cfg["dim"] == 1 else "square"
    return CollocationProblem(Domain(kind, cfg["a"], cfg["b"]), GridSpec(int(cfg["points_per_axis"])),
                              ManufacturedGaussian(cfg["sigma"]), int(cfg["n_test_domain"]),
                              int(cfg["n_test_boundary"]), name)
