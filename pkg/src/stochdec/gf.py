"""Linear algebra over a prime field GF(q) for sparse check matrices."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_ENUMERATION = 10**7


class InfeasibleSystem(ValueError):
    """``Ax = c`` has no solution."""


class EnumerationTooLarge(ValueError):
    pass


def _is_prime(q: int) -> bool:
    return q >= 2 and all(q % d for d in range(2, int(q ** 0.5) + 1))


def inverse_mod(a: int, q: int) -> int:
    return pow(int(a) % q, q - 2, q)


class SparseCheckMatrix:
    """``l x n`` matrix over GF(q) stored as one ``(columns, coefficients)``
    pair per row."""

    def __init__(self, n: int, rows, q: int = 2):
        if not _is_prime(int(q)):
            raise ValueError(f"field order must be prime, got {q}")
        self.n, self.q = int(n), int(q)
        cleaned = []
        for i, row in enumerate(rows):
            cols = np.array([c for c, _ in row], dtype=np.int64)
            coefs = np.array([a for _, a in row], dtype=np.int64)
            if cols.size and (cols.min() < 0 or cols.max() >= self.n):
                raise ValueError(f"row {i}: column index out of range")
            if np.any(coefs <= 0) or np.any(coefs >= self.q):
                raise ValueError(f"row {i}: coefficients must lie in 1..q-1")
            if np.unique(cols).size != cols.size:
                raise ValueError(f"row {i}: duplicate column")
            order = np.argsort(cols)
            cleaned.append((cols[order], coefs[order]))
        if not cleaned:
            raise ValueError("check matrix needs at least one row")
        self.rows = cleaned

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.rows)

    @property
    def shape(self):
        return (self.l, self.n)

    @property
    def max_row_weight(self) -> int:
        return max(c.size for c, _ in self.rows)

    @classmethod
    def from_dense(cls, dense, q: int = 2) -> "SparseCheckMatrix":
        d = np.asarray(dense, dtype=np.int64) % q
        if d.ndim != 2:
            raise ValueError("dense matrix must be 2-d")
        rows = [[(int(j), int(d[i, j])) for j in np.flatnonzero(d[i])] for i in range(d.shape[0])]
        return cls(d.shape[1], rows, q)

    def to_dense(self) -> np.ndarray:
        d = np.zeros(self.shape, dtype=np.int64)
        for i, (cols, coefs) in enumerate(self.rows):
            d[i, cols] = coefs
        return d

    def column_rows(self):
        """For each column ``j``, the list of ``(row, coefficient)`` touching it."""
        out = [[] for _ in range(self.n)]
        for i, (cols, coefs) in enumerate(self.rows):
            for j, a in zip(cols.tolist(), coefs.tolist()):
                out[j].append((i, a))
        return out

    def vstack(self, other: "SparseCheckMatrix") -> "SparseCheckMatrix":
        if other.n != self.n or other.q != self.q:
            raise ValueError("stacked matrices must share n and q")
        rows = [list(zip(c.tolist(), a.tolist())) for c, a in self.rows + other.rows]
        return SparseCheckMatrix(self.n, rows, self.q)

    def __repr__(self):
        return f"SparseCheckMatrix(l={self.l}, n={self.n}, q={self.q})"

    # -- alist-style text format --------------------------------------------
    # line 1: "n l q"; then one line per row: "w  col coeff  col coeff ..."
    def dumps(self) -> str:
        lines = [f"{self.n} {self.l} {self.q}"]
        for cols, coefs in self.rows:
            pairs = " ".join(f"{c} {a}" for c, a in zip(cols.tolist(), coefs.tolist()))
            lines.append(f"{cols.size} {pairs}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SparseCheckMatrix":
        lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines or len(lines[0]) != 3:
            raise ValueError("header must read 'n l q'")
        n, l, q = map(int, lines[0])
        if len(lines) - 1 != l:
            raise ValueError(f"header announces {l} rows, found {len(lines) - 1}")
        rows = []
        for k, tok in enumerate(lines[1:]):
            w = int(tok[0])
            vals = list(map(int, tok[1:]))
            if len(vals) != 2 * w:
                raise ValueError(f"row {k}: expected {w} (col, coeff) pairs")
            rows.append(list(zip(vals[0::2], vals[1::2])))
        return cls(n, rows, q)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "SparseCheckMatrix":
        return cls.loads(Path(path).read_text())


def syndrome(A: SparseCheckMatrix, x) -> np.ndarray:
    """``Ax mod q``; ``x`` may carry leading batch axes."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape[-1] != A.n:
        raise ValueError(f"vector length {x.shape[-1]} does not match n={A.n}")
    out = np.empty(x.shape[:-1] + (A.l,), dtype=np.int64)
    for i, (cols, coefs) in enumerate(A.rows):
        out[..., i] = (x[..., cols] * coefs).sum(axis=-1) % A.q
    return out


def all_vectors(n: int, q: int, max_terms: int = MAX_ENUMERATION, chunk: int = 1 << 16):
    """Yield every vector of GF(q)^n in lexicographic order, in chunks."""
    total = q ** n
    if total > max_terms:
        raise EnumerationTooLarge(f"{q}^{n} vectors exceed budget {max_terms}")
    weights = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        yield (idx[:, None] // weights) % q


def coset_enumerate(A: SparseCheckMatrix, c, max_terms: int = MAX_ENUMERATION) -> np.ndarray:
    """All solutions of ``Ax = c`` by brute force, lexicographically ordered."""
    c = np.asarray(c, dtype=np.int64) % A.q
    if c.shape != (A.l,):
        raise ValueError(f"target must have length {A.l}")
    found = [v[np.all(syndrome(A, v) == c, axis=1)] for v in all_vectors(A.n, A.q, max_terms)]
    return np.concatenate(found, axis=0)


def rank(A) -> int:
    dense = A.to_dense() if isinstance(A, SparseCheckMatrix) else np.asarray(A)
    q = A.q if isinstance(A, SparseCheckMatrix) else 2
    return _eliminate(dense % q, q, np.arange(dense.shape[1]))[2].size


def _eliminate(M: np.ndarray, q: int, col_order: np.ndarray):
    """Gauss-Jordan over GF(q) visiting columns in ``col_order``.

    Returns the reduced matrix, the row-operation matrix ``T`` (with
    ``T @ M_original == reduced``) and the pivot columns, one per leading row.
    """
    M = M.copy() % q
    l = M.shape[0]
    T = np.eye(l, dtype=np.int64)
    pivots = []
    r = 0
    for col in col_order:
        if r == l:
            break
        nz = np.flatnonzero(M[r:, col])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            M[[r, p]] = M[[p, r]]
            T[[r, p]] = T[[p, r]]
        inv = inverse_mod(M[r, col], q)
        M[r] = (M[r] * inv) % q
        T[r] = (T[r] * inv) % q
        for i in range(l):
            if i != r and M[i, col]:
                f = M[i, col]
                M[i] = (M[i] - f * M[r]) % q
                T[i] = (T[i] - f * T[r]) % q
        pivots.append(int(col))
        r += 1
    return M, T, np.array(pivots, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class SystematicForm:
    """Equivalent system ``[Abar | I] x_perm = T c`` plus a consistency check.

    ``perm[p]`` is the original column sitting at reduced position ``p``;
    reduced positions ``0..n_free-1`` are free, the last ``l_red`` are parity.
    ``null_rows @ c == 0 (mod q)`` must hold for the system to be consistent.
    """

    A: SparseCheckMatrix
    abar: np.ndarray       # (l_red, n_free)
    perm: np.ndarray       # (n,)
    transform: np.ndarray  # (l_red, l)
    null_rows: np.ndarray  # (l - l_red, l)

    @property
    def q(self) -> int:
        return self.A.q

    @property
    def n(self) -> int:
        return self.A.n

    @property
    def l_red(self) -> int:
        return self.abar.shape[0]

    @property
    def n_free(self) -> int:
        return self.n - self.l_red

    @property
    def free_cols(self) -> np.ndarray:
        return self.perm[: self.n_free]

    @property
    def parity_cols(self) -> np.ndarray:
        return self.perm[self.n_free:]

    def reduced_matrix(self) -> np.ndarray:
        """``[Abar | I]`` in reduced (permuted) coordinates."""
        return np.hstack([self.abar, np.eye(self.l_red, dtype=np.int64)])

    def reduced_target(self, c) -> np.ndarray:
        return (self.transform @ (np.asarray(c, dtype=np.int64) % self.q)) % self.q

    def is_consistent(self, c) -> bool:
        c = np.asarray(c, dtype=np.int64) % self.q
        return bool(np.all((self.null_rows @ c) % self.q == 0))

    def to_reduced(self, x) -> np.ndarray:
        return np.asarray(x)[..., self.perm]

    def from_reduced(self, xr) -> np.ndarray:
        xr = np.asarray(xr)
        out = np.empty_like(xr)
        out[..., self.perm] = xr
        return out


def to_systematic(A: SparseCheckMatrix) -> SystematicForm:
    """Reduce ``A`` to systematic form, dropping redundant rows.

    Pivots are searched from the last column backwards so that a matrix whose
    trailing block is already the identity keeps the identity permutation.
    """
    dense = A.to_dense()
    M, T, pivots = _eliminate(dense, A.q, np.arange(A.n - 1, -1, -1))
    r = pivots.size
    # rows were filled in descending pivot order; flip so parity columns ascend
    order = np.arange(r - 1, -1, -1)
    pivots = pivots[order]
    reduced = M[:r][order]
    transform = T[:r][order]
    null_rows = T[r:]
    is_pivot = np.zeros(A.n, dtype=bool)
    is_pivot[pivots] = True
    free = np.flatnonzero(~is_pivot)
    perm = np.concatenate([free, pivots])
    abar = reduced[:, free]
    for arr in (abar, perm, transform, null_rows):
        arr.setflags(write=False)
    return SystematicForm(A, abar, perm, transform, null_rows)


def feasible_point(sys: SystematicForm, c, free_values=None) -> np.ndarray:
    """A member of ``{x : Ax = c}``, in original coordinates.

    Free coordinates take ``free_values`` (default all zero); each parity
    coordinate is the reduced target minus the free part of its row.
    """
    if not sys.is_consistent(c):
        raise InfeasibleSystem("Ax = c has no solution")
    q = sys.q
    free = (np.zeros(sys.n_free, dtype=np.int64) if free_values is None
            else np.asarray(free_values, dtype=np.int64) % q)
    parity = (sys.reduced_target(c) - sys.abar @ free) % q
    return sys.from_reduced(np.concatenate([free, parity]))


def coset_members(sys: SystematicForm, c, max_terms: int = MAX_ENUMERATION) -> np.ndarray:
    """Coset enumerated through the free coordinates, lexicographically sorted."""
    if not sys.is_consistent(c):
        return np.zeros((0, sys.n), dtype=np.int64)
    frees = next(all_vectors(sys.n_free, sys.q, max_terms, chunk=max_terms)) if sys.n_free else \
        np.zeros((1, 0), dtype=np.int64)
    parity = (sys.reduced_target(c)[None, :] - frees @ sys.abar.T) % sys.q
    members = sys.from_reduced(np.hstack([frees, parity]))
    return members[np.lexsort(members.T[::-1])]


def random_tree_checks(n: int, l: int, q: int, rng: np.random.Generator,
                       max_weight: int = 3) -> SparseCheckMatrix:
    """Random full-rank check matrix whose factor graph is a forest.

    Every check owns at least one private column and shares at most one
    column with the checks built before it, so no cycle can form.
    """
    if n < l + 1:
        raise ValueError("need n > l")
    cols = rng.permutation(n).tolist()
    used: list[int] = []
    rows = []
    spare = n - l  # columns beyond the one private column each check needs
    for _ in range(l):
        share = bool(used) and rng.random() < 0.8
        weight = int(rng.integers(2, max(max_weight, 2) + 1))
        extra = min(weight - 1 - int(share), spare)
        own = [cols.pop() for _ in range(1 + extra)]
        spare -= extra
        members = own + ([int(rng.choice(used))] if share else [])
        used.extend(own)
        rows.append([(j, int(rng.integers(1, q))) for j in members])
    return SparseCheckMatrix(n, rows, q)
