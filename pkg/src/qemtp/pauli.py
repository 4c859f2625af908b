"""Pauli-basis projection of real symmetric matrices.

Two routes produce the same coefficients: the direct trace mapping over every
n-qubit Pauli string, and MLQC, which splits the matrix into a sum of
Kronecker products (Van Loan rearrangement + SVD), maps the small factors and
merges the products.  Pauli strings are handled as base-4 integer codes
(I=0, X=1, Y=2, Z=3, qubit 0 in the most significant digit) so that integer
order is lexicographic string order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Iterable, Iterator

import numpy as np

from ._backend import kernels
from .errors import DimensionError, InvalidParameterError

LETTERS = "IXYZ"
DROP_TOLERANCE = 1e-14
RANK_CUTOFF = 1e-12

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, order=True)
class PauliString:
    """Fixed-length word over ``IXYZ``; the leftmost letter acts on qubit 0."""

    letters: str

    def __post_init__(self):
        if any(ch not in LETTERS for ch in self.letters):
            raise InvalidParameterError(f"invalid Pauli string {self.letters!r}")

    def __str__(self) -> str:
        return self.letters

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    def y_count(self) -> int:
        return self.letters.count("Y")

    @property
    def code(self) -> int:
        code = 0
        for ch in self.letters:
            code = 4 * code + LETTERS.index(ch)
        return code

    @classmethod
    def from_code(cls, code: int, n_qubits: int) -> PauliString:
        letters = []
        for _ in range(n_qubits):
            letters.append(LETTERS[code & 3])
            code >>= 2
        return cls("".join(reversed(letters)))

    def matrix(self) -> np.ndarray:
        """Dense ``2^n x 2^n`` operator (reference path, small n only)."""
        return reduce(np.kron, (PAULI_MATRICES[ch] for ch in self.letters), np.eye(1, dtype=complex))

    def apply(self, state: np.ndarray) -> np.ndarray:
        """Act on a statevector without materialising the operator."""
        perm, phase = action(self.code, self.n_qubits)
        return phase * np.asarray(state)[..., perm]


def is_odd_y(s: PauliString | str) -> bool:
    letters = s.letters if isinstance(s, PauliString) else s
    return letters.count("Y") % 2 == 1


def action(code: int, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Row permutation and phases with ``(P @ psi)[r] == phase[r] * psi[perm[r]]``."""
    xs, zs = _masks(np.array([code]), n_qubits)
    rows = np.arange(1 << n_qubits)
    parity = _popcount(rows & int(zs[0])) & 1
    ny = int(y_counts(np.array([code]), n_qubits)[0])
    phase = (-1j) ** ny * (1 - 2 * parity)
    if ny % 2 == 0:
        phase = phase.real
    return rows ^ int(xs[0]), phase


def _popcount(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.int64, copy=True)
    count = np.zeros_like(a)
    while np.any(a):
        count += a & 1
        a >>= 1
    return count


def _masks(codes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.zeros_like(codes)
    z = np.zeros_like(codes)
    for p in range(n):
        d = (codes >> (2 * p)) & 3
        x |= ((d == 1) | (d == 2)).astype(np.int64) << p
        z |= (d >= 2).astype(np.int64) << p
    return x, z


def y_counts(codes: np.ndarray, n: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    ny = np.zeros_like(codes)
    for p in range(n):
        ny += ((codes >> (2 * p)) & 3) == 2
    return ny


@lru_cache(maxsize=None)
def _code_table(n: int, even_y_only: bool) -> tuple[np.ndarray, np.ndarray]:
    codes = np.arange(4**n, dtype=np.int64)
    ny = y_counts(codes, n)
    if even_y_only:
        keep = ny % 2 == 0
        codes, ny = codes[keep], ny[keep]
    codes.flags.writeable = False
    ny.flags.writeable = False
    return codes, ny


def all_codes(n: int, even_y_only: bool = False) -> np.ndarray:
    return _code_table(n, even_y_only)[0]


def _phase(ny: np.ndarray) -> np.ndarray:
    # (-i)**ny for integer arrays, exact
    return np.array([1, -1j, -1, 1j])[np.asarray(ny) % 4]


def _qubits_for(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


def _square(g) -> np.ndarray:
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {g.shape}")
    return g


def is_real_symmetric(g: np.ndarray) -> bool:
    if np.iscomplexobj(g) and np.any(np.imag(g)):
        return False
    g = np.real(g)
    scale = np.max(np.abs(g)) if g.size else 0.0
    return bool(np.all(np.abs(g - g.T) <= 1e-14 * scale))


@dataclass
class PauliDecomposition:
    """Sparse Pauli expansion ``sum_k coeffs[k] * P(codes[k])``.

    Codes are strictly increasing; coefficients with magnitude at or below
    ``DROP_TOLERANCE`` are never stored.
    """

    n_qubits: int
    codes: np.ndarray
    coeffs: np.ndarray
    provenance: str = "naive"
    rank: int | None = None

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        self.coeffs = np.asarray(self.coeffs)
        if self.codes.shape != self.coeffs.shape:
            raise DimensionError("codes and coefficients differ in length")

    @classmethod
    def from_dense_coefficients(
        cls, n_qubits: int, codes: np.ndarray, coeffs: np.ndarray, provenance: str = "naive",
        rank: int | None = None, tol: float = DROP_TOLERANCE, assume_sorted: bool = False,
    ) -> PauliDecomposition:
        codes = np.asarray(codes, dtype=np.int64)
        coeffs = np.asarray(coeffs)
        keep = np.abs(coeffs) > tol
        codes, coeffs = codes[keep], coeffs[keep]
        if np.iscomplexobj(coeffs) and not np.any(coeffs.imag):
            coeffs = coeffs.real.copy()
        if not assume_sorted:
            order = np.argsort(codes, kind="stable")
            codes, coeffs = codes[order], coeffs[order]
        return cls(n_qubits, codes, coeffs, provenance, rank)

    @classmethod
    def from_items(cls, n_qubits: int, items: Iterable[tuple[str | PauliString, complex]],
                   provenance: str = "naive") -> PauliDecomposition:
        acc: dict[int, complex] = {}
        for s, c in items:
            s = s if isinstance(s, PauliString) else PauliString(s)
            if s.n_qubits != n_qubits:
                raise DimensionError(f"{s} does not act on {n_qubits} qubits")
            acc[s.code] = acc.get(s.code, 0) + c
        codes = np.array(sorted(acc), dtype=np.int64)
        coeffs = np.array([acc[k] for k in codes])
        return cls.from_dense_coefficients(n_qubits, codes, coeffs, provenance)

    def __len__(self) -> int:
        return len(self.codes)

    def __iter__(self) -> Iterator[tuple[PauliString, complex]]:
        for code, c in zip(self.codes, self.coeffs):
            yield PauliString.from_code(int(code), self.n_qubits), c.item()

    @property
    def strings(self) -> list[PauliString]:
        return [PauliString.from_code(int(k), self.n_qubits) for k in self.codes]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.coeffs)

    def as_dict(self) -> dict[str, complex]:
        return {str(s): c for s, c in self}

    def coefficient(self, s: str | PauliString) -> complex:
        code = (s if isinstance(s, PauliString) else PauliString(s)).code
        i = np.searchsorted(self.codes, code)
        if i < len(self.codes) and self.codes[i] == code:
            return self.coeffs[i].item()
        return 0.0

    def dense_coefficients(self) -> np.ndarray:
        """Coefficient vector over all ``4^n`` codes (zeros where not stored)."""
        out = np.zeros(4**self.n_qubits, dtype=self.coeffs.dtype if len(self) else float)
        out[self.codes] = self.coeffs
        return out

    def y_counts(self) -> np.ndarray:
        return y_counts(self.codes, self.n_qubits)

    def to_matrix(self) -> np.ndarray:
        """Reconstruct ``sum_k c_k P_k`` as a dense matrix."""
        weights = self.coeffs * _phase(self.y_counts())
        real = kernels.scatter(self.codes, np.ascontiguousarray(weights.real, dtype=float), self.n_qubits)
        if np.any(np.imag(weights)):
            imag = kernels.scatter(self.codes, np.ascontiguousarray(weights.imag, dtype=float), self.n_qubits)
            return real + 1j * imag
        return real

    def to_text(self) -> str:
        lines = []
        for s, c in self:
            if isinstance(c, complex):
                lines.append(f"{s} {c.real:.17e}{c.imag:+.17e}j")
            else:
                lines.append(f"{s} {c:.17e}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> PauliDecomposition:
        items = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidParameterError(f"line {lineno}: expected '<string> <coefficient>'")
            value = complex(parts[1]) if "j" in parts[1] else float(parts[1])
            items.append((PauliString(parts[0]), value))
        if n_qubits is None:
            if not items:
                raise InvalidParameterError("cannot infer qubit count from an empty decomposition")
            n_qubits = items[0][0].n_qubits
        return cls.from_items(n_qubits, items)


def naive_pauli_decompose(g, symmetric_filter: bool = False) -> PauliDecomposition:
    """Project ``g`` on every Pauli string via ``c = Tr(g P) / 2^n``.

    With ``symmetric_filter`` and a real symmetric input, strings with an odd
    number of Y letters are skipped (their coefficient is identically zero).
    """
    g = _square(g)
    n = _qubits_for(g.shape[0])
    skip_odd = symmetric_filter and is_real_symmetric(g)
    codes, ny = _code_table(n, skip_odd)
    sums = kernels.trace_sums(np.ascontiguousarray(np.real(g), dtype=float), codes, n)
    if np.iscomplexobj(g) and np.any(np.imag(g)):
        sums = sums + 1j * kernels.trace_sums(np.ascontiguousarray(np.imag(g), dtype=float), codes, n)
    coeffs = _phase(ny) * sums / 2**n
    return PauliDecomposition.from_dense_coefficients(n, codes, coeffs, "naive")


def naive_pauli_decompose_reference(g) -> PauliDecomposition:
    """Dense-multiply oracle: builds every ``P_k`` and takes ``Tr(g P_k)``."""
    g = _square(g)
    n = _qubits_for(g.shape[0])
    codes = all_codes(n)
    coeffs = np.array([np.trace(g @ PauliString.from_code(int(k), n).matrix()) for k in codes]) / 2**n
    return PauliDecomposition.from_dense_coefficients(n, codes, coeffs, "naive")


def rearrange(g, block_dims: tuple[int, int, int, int]) -> np.ndarray:
    """Van Loan rearrangement: row ``i + j*m1`` is ``vec(G_ij)^T`` (column-major vec).

    ``block_dims`` is ``(m1, n1, m2, n2)``; ``g`` is ``m1*m2 x n1*n2`` made of
    ``m1 x n1`` blocks of size ``m2 x n2``.
    """
    m1, n1, m2, n2 = block_dims
    g = np.asarray(g)
    if g.shape != (m1 * m2, n1 * n2):
        raise DimensionError(f"matrix of shape {g.shape} does not split as {block_dims}")
    return g.reshape(m1, m2, n1, n2).transpose(2, 0, 3, 1).reshape(n1 * m1, n2 * m2)


def unrearrange(r, block_dims: tuple[int, int, int, int]) -> np.ndarray:
    m1, n1, m2, n2 = block_dims
    r = np.asarray(r)
    if r.shape != (m1 * n1, m2 * n2):
        raise DimensionError(f"rearranged shape {r.shape} does not match {block_dims}")
    return r.reshape(n1, m1, n2, m2).transpose(1, 3, 0, 2).reshape(m1 * m2, n1 * n2)


def split_dims(n: int) -> tuple[int, int]:
    """Qubit split for the Kronecker factors: ``ceil(n/2)`` left, ``floor(n/2)`` right."""
    return (n + 1) // 2, n // 2


@dataclass
class KroneckerFactorSet:
    """``sum_r left[r] (x) right[r]`` with the full singular spectrum of the rearrangement.

    ``parity`` is set when the source matrix was symmetric: 0 marks a
    symmetric/symmetric factor pair, 1 a skew/skew pair.
    """

    left: np.ndarray
    right: np.ndarray
    singular_values: np.ndarray
    norm: float = 0.0
    parity: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return self.left.shape[0]

    @property
    def factors(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.left, self.right))

    def to_matrix(self) -> np.ndarray:
        m1, n1 = self.left.shape[1:]
        m2, n2 = self.right.shape[1:]
        out = np.einsum("rij,rab->iajb", self.left, self.right)
        return out.reshape(m1 * m2, n1 * n2)

    def tail_norm(self) -> float:
        """Eckart-Young truncation error ``sqrt(sum_{r>R} sigma_r^2)``."""
        return float(np.sqrt(np.sum(self.singular_values[self.rank:] ** 2)))


def numerical_rank(singular_values: np.ndarray, cutoff: float = RANK_CUTOFF) -> int:
    if singular_values.size == 0 or singular_values[0] == 0:
        return 1
    return max(1, int(np.sum(singular_values > cutoff * singular_values[0])))


@lru_cache(maxsize=None)
def _vec_basis(m: int, skew: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index pairs and weights of the orthonormal symmetric (or skew) basis of m x m.

    A vec-space vector ``x`` (column-major) has coordinates
    ``(x[a] +/- x[b]) * w``; diagonal entries use ``a == b`` with ``w = 1/2``.
    """
    i, j = np.triu_indices(m, 1)
    upper, lower = i + j * m, j + i * m
    if skew:
        a, b, w = upper, lower, np.full(len(upper), np.sqrt(0.5))
    else:
        diag = np.arange(m) * (m + 1)
        a = np.concatenate([diag, upper])
        b = np.concatenate([diag, lower])
        w = np.concatenate([np.full(m, 0.5), np.full(len(upper), np.sqrt(0.5))])
    for arr in (a, b, w):
        arr.flags.writeable = False
    return a, b, w


@lru_cache(maxsize=None)
def _vec_projector(m: int, skew: bool) -> np.ndarray:
    """Orthonormal rows spanning the symmetric (or skew) part of vec space."""
    a, b, w = _vec_basis(m, skew)
    rows = np.arange(len(a))
    p = np.zeros((len(a), m * m))
    p[rows, a] = w
    np.add.at(p, (rows, b), -w if skew else w)
    p.flags.writeable = False
    return p


def _structured_blocks(r: np.ndarray, m1: int, m2: int):
    """Per-parity SVDs of the rearrangement of a symmetric matrix, in basis coordinates.

    Transposition symmetry makes the rearranged matrix block diagonal in the
    symmetric/skew vec bases, so two smaller SVDs give the same triples.
    """
    out = []
    for skew in (False, True):
        pl, pr = _vec_projector(m1, skew), _vec_projector(m2, skew)
        if len(pl) == 0 or len(pr) == 0:
            continue
        u, s, vt = np.linalg.svd(pl @ r @ pr.T, full_matrices=False)
        out.append((int(skew), u, s, vt.T))
    return out


def _structured_svd(r: np.ndarray, m1: int, m2: int):
    """Full-space SVD triples of a symmetric rearrangement, sorted by singular value."""
    us, vs, ss, ps = [], [], [], []
    for parity, u, s, v in _structured_blocks(r, m1, m2):
        us.append(_vec_projector(m1, bool(parity)).T @ u)
        vs.append(_vec_projector(m2, bool(parity)).T @ v)
        ss.append(s)
        ps.append(np.full(s.shape, parity))
    s = np.concatenate(ss)
    order = np.argsort(-s, kind="stable")
    return np.hstack(us)[:, order], s[order], np.hstack(vs)[:, order], np.concatenate(ps)[order]


def _resolve_rank(s: np.ndarray, rank: int | str, max_rank: int) -> int:
    if rank == "full":
        return numerical_rank(s)
    if isinstance(rank, str) or not 1 <= int(rank) <= max_rank:
        raise InvalidParameterError(f"rank must lie in [1, {max_rank}] or be 'full', got {rank!r}")
    return int(rank)


def gkd(g, rank: int | str = "full") -> KroneckerFactorSet:
    """Generalised Kronecker decomposition of a ``2^n`` square matrix.

    ``rank="full"`` keeps every singular value above ``RANK_CUTOFF * sigma_1``.
    Real symmetric inputs take the structured SVD path and yield factor pairs
    that are both symmetric or both skew.
    """
    g = _square(g)
    if np.iscomplexobj(g):
        raise DimensionError("Kronecker decomposition expects a real matrix")
    n = _qubits_for(g.shape[0])
    left_q, right_q = split_dims(n)
    m1, m2 = 1 << left_q, 1 << right_q
    rearranged = rearrange(g, (m1, m1, m2, m2))
    parity = None
    if is_real_symmetric(g):
        u, s, v, parity = _structured_svd(rearranged, m1, m2)
    else:
        u, s, vt = np.linalg.svd(rearranged, full_matrices=False)
        v = vt.T
    r = _resolve_rank(s, rank, min(m1 * m1, m2 * m2))
    root = np.sqrt(s[:r])
    # vec() is column-major, hence the transposes
    left = (u[:, :r] * root).T.reshape(r, m1, m1).transpose(0, 2, 1)
    right = (v[:, :r] * root).T.reshape(r, m2, m2).transpose(0, 2, 1)
    return KroneckerFactorSet(
        np.ascontiguousarray(left), np.ascontiguousarray(right), s, float(np.linalg.norm(g)),
        None if parity is None else parity[:r],
    )


def nkd(g) -> tuple[np.ndarray, np.ndarray]:
    """Nearest single Kronecker product ``B (x) C`` in Frobenius norm."""
    fs = gkd(g, 1)
    return fs.left[0], fs.right[0]


@lru_cache(maxsize=None)
def _parity_table(n: int, parity: int) -> tuple[np.ndarray, np.ndarray]:
    codes, ny = _code_table(n, False)
    keep = ny % 2 == parity
    # real weight t with coefficient t * (-i)**(ny % 2): (-i)**ny = (-1)**(ny // 2) * (-i)**(ny % 2)
    sign = (-1.0) ** (ny[keep] // 2) / 2**n
    codes = codes[keep]
    codes.flags.writeable = False
    sign.flags.writeable = False
    return codes, sign


def _factor_weights(stack: np.ndarray, n: int, parity: int) -> tuple[np.ndarray, np.ndarray]:
    """Real Pauli weights of a stack of real factors on strings of one Y parity."""
    codes, sign = _parity_table(n, parity)
    if len(codes) == 0 or stack.shape[0] == 0:
        return np.zeros((stack.shape[0], len(codes))), codes
    if n == 0:
        return stack.reshape(stack.shape[0], 1) * sign, codes
    sums = kernels.trace_sums_batch(np.ascontiguousarray(stack, dtype=float), codes, n)
    return sums * sign, codes


# factors up to this many qubits are mapped through a cached dense transform
_DENSE_MAP_QUBITS = 5


@lru_cache(maxsize=None)
def _coordinate_map(m: int, k: int, parity: int) -> np.ndarray:
    """Pauli weights of each symmetric (parity 0) or skew (parity 1) basis matrix."""
    pl = _vec_projector(m, bool(parity))
    # column-major vec: basis element e = i + j*m is the matrix with a one at (i, j)
    unit = np.zeros((m * m, m, m))
    idx = np.arange(m * m)
    unit[idx, idx % m, idx // m] = 1.0
    w = pl @ _factor_weights(unit, k, parity)[0]
    w.flags.writeable = False
    return w


def _coordinate_weights(y: np.ndarray, m: int, k: int, parity: int):
    """Weights of factors given by basis coordinates ``y`` (one column per factor)."""
    codes = _parity_table(k, parity)[0]
    if k <= _DENSE_MAP_QUBITS:
        return y.T @ _coordinate_map(m, k, parity), codes
    full = _vec_projector(m, bool(parity)).T @ y
    stack = full.T.reshape(-1, m, m).transpose(0, 2, 1)
    return _factor_weights(stack, k, parity)


@lru_cache(maxsize=None)
def _merge_index(left_q: int, right_q: int, parity: int) -> np.ndarray:
    """Flat grid positions of the products of one Y parity."""
    ca, cb = _parity_table(left_q, parity)[0], _parity_table(right_q, parity)[0]
    idx = (ca[:, None] * 4**right_q + cb[None, :]).ravel()
    idx.flags.writeable = False
    return idx


def mlqc_decompose(g, rank: int | str = "full", symmetric_filter: bool = False) -> PauliDecomposition:
    """Pauli mapping through the Kronecker factors of ``g``.

    Each factor pair is mapped at its own size and products of coefficients
    are accumulated onto the concatenated strings.  At full rank the result
    coincides with :func:`naive_pauli_decompose`.

    For symmetric inputs the factor pairs are symmetric/symmetric or
    skew/skew, so only even-Y x even-Y and odd-Y x odd-Y products exist and
    the odd-Y merged strings are never formed; ``symmetric_filter`` then has
    nothing left to remove.  For other real inputs every product is formed.
    """
    g = _square(g)
    n = _qubits_for(g.shape[0])
    left_q, right_q = split_dims(n)
    m1, m2 = 1 << left_q, 1 << right_q
    grid_shape = (4**left_q, 4**right_q)
    if not np.iscomplexobj(g) and is_real_symmetric(g):
        blocks = _structured_blocks(rearrange(g, (m1, m1, m2, m2)), m1, m2)
        s_all = np.concatenate([b[2] for b in blocks])
        r = _resolve_rank(np.sort(s_all)[::-1], rank, min(m1 * m1, m2 * m2))
        chosen = np.zeros(s_all.size, dtype=bool)
        chosen[np.argsort(-s_all, kind="stable")[:r]] = True
        grid = np.zeros(grid_shape)
        flat = grid.reshape(-1)
        offset = 0
        for parity, u, s_p, v in blocks:
            keep = chosen[offset:offset + s_p.size]
            offset += s_p.size
            if not np.any(keep):
                continue
            root = np.sqrt(s_p[keep])
            ta, ca = _coordinate_weights(u[:, keep] * root, m1, left_q, parity)
            tb, cb = _coordinate_weights(v[:, keep] * root, m2, right_q, parity)
            if len(ca) and len(cb):
                # (-i)(-i) = -1 on the skew/skew products
                prod = ta.T @ tb
                flat[_merge_index(left_q, right_q, parity)] = -prod.ravel() if parity else prod.ravel()
        rank_used = r
    else:
        fs = gkd(g, rank)
        rank_used = fs.rank
        grid = np.zeros(grid_shape, dtype=complex)
        ta_e, ca_e = _factor_weights(fs.left, left_q, 0)
        ta_o, ca_o = _factor_weights(fs.left, left_q, 1)
        tb_e, cb_e = _factor_weights(fs.right, right_q, 0)
        tb_o, cb_o = _factor_weights(fs.right, right_q, 1)
        grid[np.ix_(ca_e, cb_e)] = ta_e.T @ tb_e
        if len(ca_o) and len(cb_o):
            grid[np.ix_(ca_o, cb_o)] = -(ta_o.T @ tb_o)
        if len(cb_o):
            grid[np.ix_(ca_e, cb_o)] = -1j * (ta_e.T @ tb_o)
        if len(ca_o):
            grid[np.ix_(ca_o, cb_e)] = -1j * (ta_o.T @ tb_e)
    codes = np.arange(4**n, dtype=np.int64)
    provenance = f"mlqc{{R={rank_used}}}"
    return PauliDecomposition.from_dense_coefficients(
        n, codes, grid.ravel(), provenance, rank_used, assume_sorted=True
    )


def effective_basis_bounds(n: int) -> tuple[int, int]:
    """``(2^n, sum_i C(n, 2i) 3^(n-2i))``: bounds on the nonzero-term count."""
    if n < 1:
        raise InvalidParameterError("qubit count must be at least 1")
    upper = sum(math.comb(n, 2 * i) * 3 ** (n - 2 * i) for i in range(n // 2 + 1))
    return 2**n, upper


def circuits_reduced(n: int, n_nonzero: int) -> int:
    """Imaginary-part circuits skipped per cost evaluation: ``n * N_nonzero^2``."""
    if n_nonzero < 0:
        raise InvalidParameterError("term count must be non-negative")
    return n * n_nonzero * n_nonzero


def mapping_error(g, d: PauliDecomposition) -> float:
    """Relative Frobenius reconstruction error of a decomposition."""
    g = _square(g)
    if _qubits_for(g.shape[0]) != d.n_qubits:
        raise DimensionError("decomposition and matrix sizes differ")
    norm = np.linalg.norm(g)
    if norm == 0:
        raise InvalidParameterError("mapping error is undefined for the zero matrix")
    if len(d) == 0:
        return 1.0
    return float(np.linalg.norm(g - d.to_matrix()) / norm)
