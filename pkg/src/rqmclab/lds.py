"""Sobol low-discrepancy points with linear matrix scrambling and digital shift.

Points are generated in natural index order (random access by index), with
32-bit generating matrices built from a Joe-Kuo style direction-number table.
Randomization is a per-dimension random nonsingular lower-triangular bit
matrix (unit diagonal) applied to the generating matrix, followed by a random
digital shift.  Scrambled coordinates additionally carry a constant nonzero
sub-resolution offset (20 bits below the 32-bit grid) so that a randomized
coordinate is never exactly 0; this keeps all dyadic stratification intact
while protecting downstream inverse-CDF transforms.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

DEFAULT_BITS = 32
_TAIL_BITS = 20
_ENV_TABLE = "RQMCLAB_DIRECTION_FILE"

_DATA_FILE = os.path.join(os.path.dirname(__file__), "data", "joe-kuo-d512.txt")
_default_table = None


@dataclass(frozen=True)
class DirectionNumbers:
    """Parsed direction-number table (dimension 1 is the implicit van der Corput)."""

    degrees: tuple
    coeff_codes: tuple
    initials: tuple

    @property
    def ndim(self):
        """Largest dimension this table supports."""
        return len(self.degrees) + 1


def load_direction_numbers(source) -> DirectionNumbers:
    """Parse a direction-number table in the standard text format.

    Each record is a whitespace-separated line ``d s a m_1 ... m_s``; a header
    line is tolerated.  ``source`` may be a path, bytes, str content, or a
    file-like object.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (bytes, bytearray)):
        text = bytes(source)
    elif isinstance(source, str) and "\n" not in source and os.path.exists(source):
        with open(source, "rb") as fh:
            text = fh.read()
    else:
        text = source
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")

    degrees, codes, initials = [], [], []
    lines = text.splitlines()
    start = 0
    if lines and not lines[0].split()[:1][0:1] == []:
        # skip a non-numeric header line such as "d s a m_i"
        if lines and lines[0].split() and not lines[0].split()[0].isdigit():
            start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) < 4:
            raise ValueError(f"direction-number parse error at line {lineno}: "
                             f"expected 'd s a m_1..m_s', got {line!r}")
        try:
            s = int(fields[1])
            a = int(fields[2])
            ms = [int(v) for v in fields[3:]]
        except ValueError:
            raise ValueError(f"direction-number parse error at line {lineno}: "
                             f"non-integer field in {line!r}") from None
        if len(ms) != s:
            raise ValueError(f"direction-number parse error at line {lineno}: "
                             f"expected {s} initial values, got {len(ms)}")
        for k, m in enumerate(ms, start=1):
            if m % 2 == 0 or m >= (1 << k):
                raise ValueError(f"direction-number parse error at line {lineno}: "
                                 f"m_{k}={m} must be odd and < 2^{k}")
        degrees.append(s)
        codes.append(a)
        initials.append(tuple(ms))
    if not degrees:
        raise ValueError("direction-number parse error: empty table")
    return DirectionNumbers(tuple(degrees), tuple(codes), tuple(initials))


def default_direction_numbers() -> DirectionNumbers:
    """The vendored Joe-Kuo table (512 dimensions), or the file named by
    the RQMCLAB_DIRECTION_FILE environment variable."""
    global _default_table
    path = os.environ.get(_ENV_TABLE, _DATA_FILE)
    if _default_table is None or _default_table[0] != path:
        _default_table = (path, load_direction_numbers(path))
    return _default_table[1]


def _direction_integers(dirs: DirectionNumbers, dim: int, w: int) -> np.ndarray:
    """Direction integers v_k = m_k * 2^(w-k), k = 1..w, for one dimension (1-based)."""
    if dim == 1:
        return np.array([1 << (w - k) for k in range(1, w + 1)], dtype=np.uint64)
    s = dirs.degrees[dim - 2]
    a = dirs.coeff_codes[dim - 2]
    m = list(dirs.initials[dim - 2])
    for k in range(s, w):
        # recurrence m_k = 2 a_1 m_{k-1} ^ ... ^ 2^{s-1} a_{s-1} m_{k-s+1} ^ 2^s m_{k-s} ^ m_{k-s}
        new = m[k - s] ^ (m[k - s] << s)
        for i in range(1, s):
            if (a >> (s - 1 - i)) & 1:
                new ^= m[k - i] << i
        m.append(new)
    return np.array([m[k - 1] << (w - k) for k in range(1, w + 1)], dtype=np.uint64)


def _scramble_columns(cols: np.ndarray, rng: np.random.Generator, w: int) -> np.ndarray:
    """Left-multiply each dimension's generating matrix by a random unit
    lower-triangular bit matrix (bit 1 = most significant digit)."""
    s = cols.shape[0]
    out = np.zeros_like(cols)
    for i in range(1, w + 1):
        # row i mask: random bits above the diagonal position, diagonal forced to 1
        if i == 1:
            row = np.full(s, 1 << (w - 1), dtype=np.uint64)
        else:
            r = rng.integers(0, 1 << (i - 1), size=s, dtype=np.uint64)
            row = (r << np.uint64(w - i + 1)) | np.uint64(1 << (w - i))
        parity = (np.bitwise_count(row[:, None] & cols) & 1).astype(np.uint64)
        out |= parity << np.uint64(w - i)
    return out


class PointGenerator:
    """Randomized (or plain) Sobol stream over [0,1)^s.

    Immutable after construction; ``point`` and ``block`` are pure functions
    of (generator, index) and safe to call concurrently.
    """

    def __init__(self, columns: np.ndarray, shift: np.ndarray, tail: np.ndarray,
                 seed: int, scrambled: bool, w: int = DEFAULT_BITS):
        self.s = columns.shape[0]
        self.w = w
        self.seed = seed
        self.scrambled = scrambled
        self._shift = shift
        self._tail = tail
        # byte-indexed XOR tables: _tables[b][v] = XOR of columns 8b+j for bits j set in v
        nb = (w + 7) // 8
        tables = np.zeros((nb, 256, self.s), dtype=np.uint64)
        for b in range(nb):
            for j in range(8):
                k = 8 * b + j
                if k >= w:
                    break
                hit = (np.arange(256) >> j) & 1 == 1
                tables[b][hit] ^= columns[:, k]
        self._tables = tables
        self._nbytes = nb

    def _integers(self, indices: np.ndarray) -> np.ndarray:
        acc = self._tables[0][indices & 255]
        for b in range(1, self._nbytes):
            acc = acc ^ self._tables[b][(indices >> (8 * b)) & 255]
        return acc

    def point(self, index: int) -> np.ndarray:
        """The point at ``index`` (natural Sobol order), shape (s,)."""
        if not 0 <= index < (1 << self.w):
            raise ValueError(f"index {index} outside [0, 2^{self.w})")
        return self._to_unit(self._integers(np.array([index], dtype=np.int64)))[0]

    def block(self, n: int) -> np.ndarray:
        """Points 0..n-1 as an (n, s) matrix; row j equals point(j)."""
        if n < 1:
            raise ValueError("block size must be >= 1")
        if n > (1 << self.w):
            raise ValueError(f"block size {n} exceeds 2^{self.w}")
        return self._to_unit(self._integers(np.arange(n, dtype=np.int64)))

    def _to_unit(self, acc: np.ndarray) -> np.ndarray:
        if not self.scrambled:
            return acc.astype(np.float64) * 2.0 ** -self.w
        acc = (acc ^ self._shift) << np.uint64(_TAIL_BITS) | self._tail
        return acc.astype(np.float64) * 2.0 ** -(self.w + _TAIL_BITS)


def new_generator(dirs: DirectionNumbers, s: int, seed: int = 0,
                  scrambled: bool = True, w: int = DEFAULT_BITS) -> PointGenerator:
    """Build a Sobol generator of dimension ``s``.

    With ``scrambled=False`` the plain sequence is produced (point 0 is the
    origin); this variant is intended for tests only.
    """
    if s < 1:
        raise ValueError("dimension must be >= 1")
    if s > dirs.ndim:
        raise ValueError(f"requested dimension {s} exceeds table capacity {dirs.ndim}")
    cols = np.stack([_direction_integers(dirs, j, w) for j in range(1, s + 1)])
    if scrambled:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        cols = _scramble_columns(cols, rng, w)
        shift = rng.integers(0, 1 << w, size=s, dtype=np.uint64)
        # constant sub-resolution offset, forced nonzero so no coordinate is ever 0.0
        tail = rng.integers(1, 1 << _TAIL_BITS, size=s, dtype=np.uint64)
    else:
        shift = np.zeros(s, dtype=np.uint64)
        tail = np.zeros(s, dtype=np.uint64)
    return PointGenerator(cols, shift, tail, seed, scrambled, w)
