"""Shape-parameter sweeps and the directed search on boundary RMS.

The search starts from a predicted shape parameter ``c0``, probes one
neighbor on each side, walks in the direction of the smaller boundary RMS
and stops as soon as the boundary RMS grows.  Domain RMS is recorded for
every evaluation but never influences the path.
"""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import gmpy2

from ._validation import as_fraction, check_positive_int, parse_shape
from .precision import BigScalar, PrecisionContext

CONVERGED = "converged"
BUDGET_EXHAUSTED = "budget_exhausted"
NON_DESCENT = "non_descent"
RANGE_END = "range_end"

DEFAULT_MAX_EVALS = 50


class BudgetExhausted(RuntimeWarning):
    """The search hit ``max_evals`` before the boundary RMS started to grow."""


class NonDescent(RuntimeWarning):
    """Neither neighbor of ``c0`` improves on it."""


@dataclass
class SweepRecord:
    """One evaluated shape parameter.  Failed solves carry ``error`` and no numbers."""

    c: BigScalar
    rms: BigScalar | None = None
    rms_boundary: BigScalar | None = None
    cond: BigScalar | None = None
    residual: BigScalar | None = None
    solve_seconds: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def criterion(self):
        """Boundary RMS as mpfr; failures rank as +inf."""
        return self.rms_boundary.value if self.ok else gmpy2.inf()

    def to_dict(self) -> dict:
        def dec(x):
            return None if x is None else x.to_decimal()
        return {"c": self.c.to_decimal(), "rms": dec(self.rms), "rms_boundary": dec(self.rms_boundary),
                "cond": dec(self.cond), "residual": dec(self.residual),
                "solve_seconds": self.solve_seconds, "error": self.error}

    @classmethod
    def from_dict(cls, d: dict, ctx: PrecisionContext) -> "SweepRecord":
        def num(k):
            return None if d.get(k) is None else BigScalar.from_decimal(d[k], ctx)
        return cls(num("c"), num("rms"), num("rms_boundary"), num("cond"), num("residual"),
                   float(d.get("solve_seconds", 0.0)), d.get("error"))


# ---------------------------------------------------------------------------
# criteria: callables c -> SweepRecord

class CollocationCriterion:
    """Solve the collocation problem at ``c`` and measure both RMS errors.

    Picklable, so sweeps can hand it to worker processes.
    """

    def __init__(self, problem, beta, ctx: PrecisionContext, estimate_cond: bool = True):
        self.problem = problem
        self.beta = beta
        self.ctx = ctx
        self.estimate_cond = estimate_cond

    def __call__(self, c: BigScalar) -> SweepRecord:
        from .collocation import error_report, solve
        from .kernels import MultiquadricKernel

        t0 = time.perf_counter()
        kernel = MultiquadricKernel(self.beta, c, self.problem.dim, self.ctx)
        sol = solve(self.problem, kernel, estimate_cond=self.estimate_cond)
        rep = error_report(sol, self.problem)
        return SweepRecord(c, rep.rms, rep.rms_boundary, sol.cond, sol.residual,
                           time.perf_counter() - t0)


class TabulatedCriterion:
    """Look up ``(rms_boundary, rms)`` from a table keyed by exact c values.

    Used for testing the search logic without solving anything; values not in
    the table raise ``KeyError``.
    """

    def __init__(self, table: dict, ctx: PrecisionContext):
        self.ctx = ctx
        self.table = {}
        for c, v in table.items():
            bdy, dom = v if isinstance(v, tuple) else (v, v)
            self.table[ctx.mpfr(as_fraction(c))] = (bdy, dom)
        self.calls = 0

    def __call__(self, c: BigScalar) -> SweepRecord:
        self.calls += 1
        bdy, dom = self.table[c.value]
        return SweepRecord(c, self.ctx.scalar(as_fraction(dom)), self.ctx.scalar(as_fraction(bdy)))


def _safe_call(criterion, c: BigScalar) -> SweepRecord:
    try:
        return criterion(c)
    except (ArithmeticError, ValueError, ZeroDivisionError, KeyError, MemoryError) as exc:
        # np.linalg.LinAlgError (singular systems) is a ValueError subclass
        return SweepRecord(c, error=f"{type(exc).__name__}: {exc}")


def _worker_call(criterion, c_text: str, digits: int) -> dict:
    ctx = PrecisionContext(digits)
    return _safe_call(criterion, BigScalar.from_decimal(c_text, ctx)).to_dict()


def _evaluate(criterion, cs: Sequence[BigScalar], ctx: PrecisionContext, workers: int,
              on_record: Callable | None) -> list[SweepRecord]:
    """Records for ``cs`` in input order; ``on_record`` sees them in input order too."""
    if workers <= 1 or len(cs) <= 1:
        out = []
        for c in cs:
            rec = _safe_call(criterion, c)
            if on_record:
                on_record(rec)
            out.append(rec)
        return out
    # values cross process boundaries as exact decimal text
    with ProcessPoolExecutor(max_workers=min(workers, len(cs))) as pool:
        futs = [pool.submit(_worker_call, criterion, c.to_decimal(), ctx.digits) for c in cs]
        out = []
        for c, fut in zip(cs, futs):
            rec = SweepRecord.from_dict(fut.result(), ctx)
            rec.c = c
            if on_record:
                on_record(rec)
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# sweep

def sweep(problem, beta, c_list: Iterable, ctx: PrecisionContext, *, workers: int = 1,
          criterion: Callable | None = None, on_record: Callable | None = None) -> list[SweepRecord]:
    """Solve at every c in ``c_list``; records come back in ascending c.

    Per-c failures become records with ``error`` set.  Results do not depend
    on ``workers``.
    """
    cs = sorted({c.value: c for c in (parse_shape(v, ctx) for v in c_list)}.values(),
                key=lambda s: s.value)
    if not cs:
        raise ValueError("c_list must not be empty")
    workers = check_positive_int(workers, "workers")
    crit = criterion if criterion is not None else CollocationCriterion(problem, beta, ctx)
    return _evaluate(crit, cs, ctx, workers, on_record)


def argmin_record(records: Sequence[SweepRecord], key: str = "rms_boundary") -> SweepRecord:
    """Record with the smallest ``key`` among successful ones; ties go to the smaller c."""
    ok = [r for r in records if r.ok and getattr(r, key) is not None]
    if not ok:
        raise ValueError("no successful records")
    return min(ok, key=lambda r: (getattr(r, key).value, r.c.value))


# ---------------------------------------------------------------------------
# directed search

@dataclass(frozen=True)
class Step:
    """One move of the schedule: ``c -> c + value`` (``"add"``) or ``c * value`` (``"mul"``)."""

    kind: str
    value: Fraction

    def __post_init__(self):
        if self.kind not in ("add", "mul"):
            raise ValueError(f"step kind must be 'add' or 'mul', got {self.kind!r}")
        v = as_fraction(self.value) if not isinstance(self.value, str) else None
        object.__setattr__(self, "value", self.value if v is None else v)

    @classmethod
    def parse(cls, text: str) -> "Step":
        """``"500"`` or ``"+500"`` is additive, ``"x1.5"`` or ``"*1.5"`` multiplicative."""
        t = str(text).strip()
        if t[:1] in ("x", "*"):
            return cls("mul", t[1:].strip())
        return cls("add", t.lstrip("+").strip())

    def size(self, ctx: PrecisionContext):
        v = self.value
        return parse_shape(v, ctx).value if isinstance(v, str) else ctx.mpfr(v)


@dataclass
class SearchConfig:
    """Directed search settings.

    Parameters
    ----------
    c0 : predicted optimum (number or shape expression such as ``"7000*sqrt(2)*1e14"``)
    steps : schedule of :class:`Step`; move ``k`` in the chosen direction uses
        ``steps[min(k, len(steps) - 1)]``, the initial probe uses ``steps[0]``.
        Defaults to one additive step of ``c0 / 10``.
    grid : explicit candidate c values.  When given, neighbors are the
        adjacent grid entries and ``steps`` must be empty; ``c0`` must be on the grid.
    max_evals : evaluation budget, at least 3
    """

    c0: object
    steps: list = field(default_factory=list)
    grid: list | None = None
    max_evals: int = DEFAULT_MAX_EVALS
    criterion: str = "rms_boundary"

    def __post_init__(self):
        self.max_evals = check_positive_int(self.max_evals, "max_evals", minimum=3)
        if self.criterion != "rms_boundary":
            raise ValueError("the search criterion is fixed to 'rms_boundary'")
        self.steps = [s if isinstance(s, Step) else Step.parse(s) for s in self.steps]
        if self.grid is not None and self.steps:
            raise ValueError("give either steps or grid, not both")
        if self.grid is not None and len(self.grid) < 2:
            raise ValueError("grid needs at least 2 values")


class _Schedule:
    """Neighbor generation for a config, at a fixed precision."""

    def __init__(self, config: SearchConfig, ctx: PrecisionContext):
        self.ctx = ctx
        self.c0 = parse_shape(config.c0, ctx)
        self.grid = None
        if config.grid is not None:
            vals = sorted({g.value: g for g in (parse_shape(v, ctx) for v in config.grid)}.values(),
                          key=lambda s: s.value)
            self.grid = vals
            pos = [i for i, g in enumerate(vals) if g.value == self.c0.value]
            if not pos:
                raise ValueError("c0 must be one of the grid values")
            self.i0 = pos[0]
            return
        self.steps = config.steps
        self._default = None
        if not self.steps:
            with ctx.local():
                self._default = self.c0.value / 10
        for st in self.steps:
            if st.kind == "mul" and not st.size(ctx) > 1:
                raise ValueError(f"multiplicative steps must exceed 1, got {st.value}")

    def _size(self, k: int):
        if self._default is not None:
            return "add", self._default
        s = self.steps[min(k, len(self.steps) - 1)]
        return s.kind, s.size(self.ctx)

    def neighbor(self, c: BigScalar, k: int, direction: int, index: int | None = None):
        """The c reached from ``c`` by move ``k`` in ``direction`` (+1/-1); None if out of range."""
        if self.grid is not None:
            j = index + direction
            return (self.grid[j], j) if 0 <= j < len(self.grid) else (None, None)
        kind, size = self._size(k)
        with self.ctx.local():
            if kind == "add":
                v = c.value + size if direction > 0 else c.value - size
            else:
                v = c.value * size if direction > 0 else c.value / size
        if not v > 0 or gmpy2.is_infinite(v):
            return None, None
        return BigScalar(v, self.ctx), None


@dataclass
class SearchResult:
    """Outcome of :func:`directed_search`; unpacks as ``best_c, trace``."""

    best_c: BigScalar
    trace: list
    status: str
    best: SweepRecord

    def __iter__(self):
        yield self.best_c
        yield self.trace


def directed_search(problem, beta, config: SearchConfig, ctx: PrecisionContext, *,
                    workers: int = 1, criterion: Callable | None = None,
                    on_record: Callable | None = None) -> SearchResult:
    """Walk from ``c0`` in the direction of decreasing boundary RMS.

    1. Evaluate ``c0`` and one neighbor on each side (concurrently when
       ``workers > 1``).
    2. Head towards the neighbor with the smaller boundary RMS (ties: the
       smaller c).  If neither neighbor beats ``c0`` the status is
       ``"non_descent"`` and ``c0`` is returned.
    3. Keep stepping until the boundary RMS exceeds the previous value, the
       schedule leaves the admissible range, or ``max_evals`` is used up.
    4. Return the evaluated c with the smallest boundary RMS (ties: smaller c);
       on ``"non_descent"`` that is ``c0`` itself.

    Every c is evaluated at most once.  ``status`` is one of
    ``"converged"``, ``"non_descent"``, ``"budget_exhausted"`` and
    ``"range_end"``.
    """
    crit = criterion if criterion is not None else CollocationCriterion(problem, beta, ctx)
    workers = check_positive_int(workers, "workers")
    sched = _Schedule(config, ctx)
    cache: dict = {}
    trace: list[SweepRecord] = []

    def record(rec):
        trace.append(rec)
        cache[rec.c.value] = rec
        if on_record:
            on_record(rec)

    c0 = sched.c0
    i0 = sched.i0 if sched.grid is not None else None
    lo, ilo = sched.neighbor(c0, 0, -1, i0)
    hi, ihi = sched.neighbor(c0, 0, +1, i0)
    probe = [c for c in (c0, lo, hi) if c is not None]
    for rec in _evaluate(crit, probe, ctx, workers, None):
        record(rec)

    def finish(status):
        if status == NON_DESCENT:
            # c0 is a local minimum at the step resolution, even against equal neighbors
            best = cache[c0.value]
        else:
            best = min(trace, key=lambda r: (r.criterion(), r.c.value))
        if status == BUDGET_EXHAUSTED:
            warnings.warn(f"search stopped after {len(trace)} evaluations", BudgetExhausted, stacklevel=3)
        elif status == NON_DESCENT:
            warnings.warn("neither neighbor of c0 improves the boundary RMS", NonDescent, stacklevel=3)
        return SearchResult(best.c, trace, status, best)

    f0 = cache[c0.value].criterion()
    cand = []
    if lo is not None and cache[lo.value].criterion() < f0:
        cand.append((cache[lo.value].criterion(), lo.value, -1, lo, ilo))
    if hi is not None and cache[hi.value].criterion() < f0:
        cand.append((cache[hi.value].criterion(), hi.value, +1, hi, ihi))
    if not cand:
        return finish(NON_DESCENT)
    _, _, direction, c, idx = min(cand, key=lambda t: (t[0], t[1]))
    prev = cache[c.value].criterion()
    k = 1
    while True:
        if len(trace) >= config.max_evals:
            return finish(BUDGET_EXHAUSTED)
        nxt, idx = sched.neighbor(c, k, direction, idx)
        if nxt is None:
            return finish(RANGE_END)
        rec = cache.get(nxt.value)
        if rec is None:
            rec = _evaluate(crit, [nxt], ctx, 1, None)[0]
            record(rec)
        cur = rec.criterion()
        if cur > prev:
            return finish(CONVERGED)
        prev, c, k = cur, nxt, k + 1


def log10_or_nan(x: BigScalar | None) -> float:
    return math.nan if x is None else x.log10()
