"""Built-in test problem and matrix loading.

The bundled problem is a second-kind integral operator on [0, 1]. Its
kernel g(x, y) = min(x, y) * (1 - max(x, y)) inverts the negative second
derivative with zero boundary values; the composite trapezoid rule on a
uniform grid turns it into a dense matrix G, and the operator solved is
A = I - c * G. With the default strength c = 800 the operator has a
near-singular mode, which makes it a sharp test for refinement in
narrow precisions. External matrices come in through a small Matrix
Market reader.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mparray import PMatrix, PVector, cast_matrix, cast_vector, matvec_promoted
from .precision import Precision

__all__ = [
    "RhsKind",
    "ProblemSpec",
    "greens_kernel",
    "greens_matrix",
    "build_operator",
    "make_rhs",
    "cond_inf_exact",
    "dominant_eigenvalue",
    "MatrixMarketError",
    "load_matrix_market",
]


class RhsKind(enum.Enum):
    ONES = "ones"
    MANUFACTURED = "manufactured"


@dataclass(frozen=True)
class ProblemSpec:
    """What to solve: kernel dimension and strength, or a matrix file."""

    n: int
    c: float = 800.0
    rhs: RhsKind = RhsKind.ONES
    matrix_path: Path | None = None

    def __post_init__(self) -> None:
        if self.matrix_path is None and self.n < 3:
            raise ValueError("kernel problems need n >= 3")


def greens_kernel(x: float, y: float) -> float:
    """Kernel value at one point; both coordinates must lie in [0, 1]."""
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError("kernel arguments must lie in [0, 1]")
    lo, hi = (x, y) if x <= y else (y, x)
    return lo * (1.0 - hi)


def greens_matrix(n: int) -> PMatrix:
    """Trapezoid discretization of the kernel operator on n uniform nodes.

    Node j carries quadrature weight h = 1 / (n - 1), halved at the two
    endpoints; the endpoint rows and columns are zero anyway because the
    kernel vanishes on the boundary. Entry (i, j) is w_j * g(x_i, x_j)
    at DOUBLE. Requires n >= 3.
    """
    if n < 3:
        raise ValueError("need at least 3 quadrature nodes")
    x = np.linspace(0.0, 1.0, n)
    h = 1.0 / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    lo = np.minimum.outer(x, x)
    hi = np.maximum.outer(x, x)
    g = lo * (1.0 - hi)
    return PMatrix._wrap(g * w[np.newaxis, :], Precision.DOUBLE)


def build_operator(spec: ProblemSpec) -> PMatrix:
    """A = I - c * G at DOUBLE for a kernel-backed spec."""
    if spec.matrix_path is not None:
        raise ValueError("file-backed problems load through load_matrix_market")
    g = greens_matrix(spec.n)
    with np.errstate(all="ignore"):
        a = np.eye(spec.n) - spec.c * g.data
    return PMatrix._wrap(a, Precision.DOUBLE)


def make_rhs(a: PMatrix, kind: RhsKind) -> tuple[PVector, PVector | None]:
    """Right-hand side at the matrix tag, plus the known solution if any.

    ONES is the all-ones vector (exact at every tag). MANUFACTURED takes
    x = ones, forms b = A x at DOUBLE, and rounds b to the matrix tag;
    the returned solution stays at DOUBLE for error measurement.
    """
    n = a.data.shape[0]
    if kind is RhsKind.ONES:
        return PVector._wrap(np.ones(n, dtype=a.tag.dtype), a.tag), None
    x_true = PVector._wrap(np.ones(n), Precision.DOUBLE)
    a_wide, _ = cast_matrix(a, Precision.DOUBLE)
    b_wide = matvec_promoted(a_wide, x_true)
    b, _ = cast_vector(b_wide, a.tag)
    return b, x_true


_COND_LIMIT = 4000


def cond_inf_exact(a: PMatrix) -> float:
    """Infinity-norm condition number through an explicit inverse.

    DOUBLE only, and guarded to modest sizes: the point is the exact
    dense answer, not an estimate, so the cost is a full cubic inverse.
    Singular input surfaces as numpy.linalg.LinAlgError.
    """
    if a.tag is not Precision.DOUBLE:
        raise ValueError("condition numbers are computed at DOUBLE")
    rows, cols = a.data.shape
    if rows != cols:
        raise ValueError("matrix must be square")
    if rows > _COND_LIMIT:
        raise ValueError(f"refusing n = {rows} > {_COND_LIMIT}: the explicit inverse would be too costly")
    inv = np.linalg.inv(a.data)
    norm_a = np.abs(a.data).sum(axis=1).max()
    norm_inv = np.abs(inv).sum(axis=1).max()
    return float(norm_a * norm_inv)


def dominant_eigenvalue(g: PMatrix, tol: float = 1e-12, max_iters: int = 10_000) -> float:
    """Largest-magnitude eigenvalue by power iteration from the all-ones start.

    Assumes a real dominant eigenvalue whose eigenvector is not
    orthogonal to the start; the kernel matrices here satisfy both. The
    Rayleigh quotient must settle to within tol (relative) or
    RuntimeError is raised. The zero matrix returns 0.0.
    """
    if g.tag is not Precision.DOUBLE:
        raise ValueError("eigenvalue estimation runs at DOUBLE")
    rows, cols = g.data.shape
    if rows != cols:
        raise ValueError("matrix must be square")
    v = np.ones(rows) / math.sqrt(rows)
    lam = 0.0
    for _ in range(max_iters):
        w = g.data @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_next = float(v @ (g.data @ v))
        if abs(lam_next - lam) <= tol * max(1.0, abs(lam_next)):
            return lam_next
        lam = lam_next
    raise RuntimeError(f"power iteration did not settle in {max_iters} sweeps")


class MatrixMarketError(ValueError):
    """Parse failure with the 1-based source line attached."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def load_matrix_market(path: str | Path) -> PMatrix:
    """Read a real square matrix in Matrix Market form at DOUBLE.

    Coordinate and array formats, general and symmetric symmetry, real
    and integer fields. Duplicate coordinate entries sum; symmetric
    files must store the lower triangle. Anything else (complex,
    pattern, skew-symmetric, non-square) is rejected with the offending
    line number.
    """
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise MatrixMarketError(1, "empty file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "%%MatrixMarket" or head[1].lower() != "matrix":
        raise MatrixMarketError(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'")
    fmt, field, sym = (t.lower() for t in head[2:])
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(1, f"unsupported format {fmt!r}")
    if field not in ("real", "integer"):
        raise MatrixMarketError(1, f"unsupported field {field!r}")
    if sym not in ("general", "symmetric"):
        raise MatrixMarketError(1, f"unsupported symmetry {sym!r}")

    idx = 1
    while idx < len(lines) and (lines[idx].startswith("%") or not lines[idx].strip()):
        idx += 1
    if idx == len(lines):
        raise MatrixMarketError(len(lines), "missing size line")
    size_line = idx + 1
    parts = lines[idx].split()

    if fmt == "coordinate":
        if len(parts) != 3:
            raise MatrixMarketError(size_line, "coordinate size line needs 'rows cols nnz'")
        try:
            rows, cols, nnz = (int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError(size_line, f"bad size line {lines[idx]!r}") from None
        if rows != cols:
            raise MatrixMarketError(size_line, f"only square matrices are supported, got {rows} x {cols}")
        if rows < 1:
            raise MatrixMarketError(size_line, "matrix order must be positive")
        mat = np.zeros((rows, cols))
        seen = 0
        for offset in range(idx + 1, len(lines)):
            text = lines[offset]
            lineno = offset + 1
            if not text.strip() or text.startswith("%"):
                continue
            if seen == nnz:
                raise MatrixMarketError(lineno, f"more than the declared {nnz} entries")
            toks = text.split()
            if len(toks) != 3:
                raise MatrixMarketError(lineno, f"expected 'i j value', got {text!r}")
            try:
                i, j = int(toks[0]), int(toks[1])
                val = float(toks[2])
            except ValueError:
                raise MatrixMarketError(lineno, f"bad entry {text!r}") from None
            if not (1 <= i <= rows and 1 <= j <= cols):
                raise MatrixMarketError(lineno, f"index ({i}, {j}) outside 1..{rows}")
            if sym == "symmetric" and i < j:
                raise MatrixMarketError(lineno, "symmetric files store the lower triangle (need i >= j)")
            mat[i - 1, j - 1] += val
            if sym == "symmetric" and i != j:
                mat[j - 1, i - 1] += val
            seen += 1
        if seen != nnz:
            raise MatrixMarketError(len(lines), f"expected {nnz} entries, found {seen}")
        return PMatrix._wrap(mat, Precision.DOUBLE)

    # dense array format: one value per line, column-major
    if len(parts) != 2:
        raise MatrixMarketError(size_line, "array size line needs 'rows cols'")
    try:
        rows, cols = (int(p) for p in parts)
    except ValueError:
        raise MatrixMarketError(size_line, f"bad size line {lines[idx]!r}") from None
    if rows != cols:
        raise MatrixMarketError(size_line, f"only square matrices are supported, got {rows} x {cols}")
    if rows < 1:
        raise MatrixMarketError(size_line, "matrix order must be positive")
    if sym == "symmetric":
        slots = [(i, j) for j in range(cols) for i in range(j, rows)]
    else:
        slots = [(i, j) for j in range(cols) for i in range(rows)]
    mat = np.zeros((rows, cols))
    filled = 0
    for offset in range(idx + 1, len(lines)):
        text = lines[offset]
        lineno = offset + 1
        if not text.strip() or text.startswith("%"):
            continue
        if filled == len(slots):
            raise MatrixMarketError(lineno, f"more than the expected {len(slots)} values")
        toks = text.split()
        if len(toks) != 1:
            raise MatrixMarketError(lineno, f"expected one value per line, got {text!r}")
        try:
            val = float(toks[0])
        except ValueError:
            raise MatrixMarketError(lineno, f"bad value {toks[0]!r}") from None
        i, j = slots[filled]
        mat[i, j] = val
        if sym == "symmetric" and i != j:
            mat[j, i] = val
        filled += 1
    if filled != len(slots):
        raise MatrixMarketError(len(lines), f"expected {len(slots)} values, found {filled}")
    return PMatrix._wrap(mat, Precision.DOUBLE)
