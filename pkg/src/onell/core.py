"""Bit strings, the deterministic random source, and small combinatorial helpers.

Every randomized routine in the package draws from :class:`RandomSource`, a
xoshiro256** generator seeded through SplitMix64.  The compiled kernel
re-implements the same recurrences, so a seed replays bit-exactly on either
code path.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_TWO_POW_MINUS_53 = 1.0 / 9007199254740992.0

# Above this mean the binomial walk runs in log space.
BINOMIAL_DIRECT_MEAN_LIMIT = 64.0


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------


def splitmix64(x: int) -> int:
    """One SplitMix64 step applied to state ``x``; returns the mixed output."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


def derive_seed(base_seed: int, *keys: int | str) -> int:
    """Derive an independent 64-bit seed from ``base_seed`` and a key path.

    Keys are folded left to right, ``acc = splitmix64(acc ^ key)``, strings
    being hashed with FNV-1a first.  The result is ``base_seed ^ acc``, so a
    single integer key ``i`` gives ``base_seed ^ splitmix64(i)``.
    """
    acc = 0
    for key in keys:
        k = _fnv1a64(key) if isinstance(key, str) else (int(key) & MASK64)
        acc = splitmix64(acc ^ k)
    return (int(base_seed) & MASK64) ^ acc


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


# ---------------------------------------------------------------------------
# RandomSource
# ---------------------------------------------------------------------------


class RandomSource:
    """xoshiro256** generator with a fixed set of derived samplers.

    The sampling procedures are part of the reproducibility contract; the
    compiled kernel mirrors each of them draw for draw.
    """

    __slots__ = ("seed", "_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & MASK64
        sm = self.seed
        words = []
        for _ in range(4):
            words.append(splitmix64(sm))
            sm = (sm + GOLDEN_GAMMA) & MASK64
        self._s0, self._s1, self._s2, self._s3 = words

    # state transfer to and from the compiled kernel
    def getstate(self) -> tuple[int, int, int, int]:
        return (self._s0, self._s1, self._s2, self._s3)

    def setstate(self, state: Sequence[int]) -> None:
        s = [int(v) & MASK64 for v in state]
        if len(s) != 4 or not any(s):
            raise ValueError("xoshiro256** state must be four words, not all zero")
        self._s0, self._s1, self._s2, self._s3 = s

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed})"

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def random(self) -> float:
        """Uniform real in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _TWO_POW_MINUS_53

    def randbelow(self, k: int) -> int:
        """Uniform integer in [0, k) by rejection of the biased low range."""
        if k <= 0:
            raise ValueError(f"randbelow bound must be positive, got {k}")
        threshold = ((MASK64 + 1) - k) % k
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % k

    def sample_distinct(self, n: int, k: int) -> list[int]:
        """``k`` distinct indices from ``[0, n)`` via Floyd's algorithm.

        Exactly ``k`` calls to :meth:`randbelow`; indices are returned in
        insertion order.
        """
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} distinct indices from {n}")
        chosen: set[int] = set()
        out: list[int] = []
        for j in range(n - k, n):
            t = self.randbelow(j + 1)
            if t in chosen:
                t = j
            chosen.add(t)
            out.append(t)
        return out

    def binomial(self, n: int, p: float) -> int:
        return sample_binomial(n, p, self)


# ---------------------------------------------------------------------------
# BitString
# ---------------------------------------------------------------------------


class BitString:
    """Immutable fixed-length bit string backed by a read-only uint8 array."""

    __slots__ = ("_bits",)

    def __init__(self, bits: Iterable[int] | np.ndarray | str):
        if isinstance(bits, str):
            if bits and set(bits) - {"0", "1"}:
                raise ValueError(f"bit string literal may only contain 0/1: {bits!r}")
            arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        else:
            arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
            if arr.size and not np.isin(arr, (0, 1)).all():
                raise ValueError("bit values must be 0 or 1")
            arr = arr.astype(np.uint8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a bit string needs at least one bit")
        arr = arr.copy()
        arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def ones(cls, n: int) -> "BitString":
        return cls(np.ones(n, dtype=np.uint8))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def n(self) -> int:
        return int(self._bits.size)

    def __len__(self) -> int:
        return int(self._bits.size)

    def __getitem__(self, i: int) -> int:
        return int(self._bits[i])

    def __iter__(self):
        return (int(b) for b in self._bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return self._bits.size == other._bits.size and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self) -> int:
        return hash(self._bits.tobytes())

    def __str__(self) -> str:
        return (self._bits + ord("0")).tobytes().decode("ascii")

    def __repr__(self) -> str:
        s = str(self)
        if len(s) > 40:
            s = s[:37] + "..."
        return f"BitString('{s}')"

    def count_ones(self) -> int:
        return int(np.count_nonzero(self._bits))

    def flipped(self, indices: Iterable[int]) -> "BitString":
        arr = self._bits.copy()
        idx = np.fromiter(indices, dtype=np.int64)
        arr[idx] ^= 1
        return BitString(arr)

    def complement(self) -> "BitString":
        return BitString(self._bits ^ 1)

    def to_bytearray(self) -> bytearray:
        return bytearray(self._bits.tobytes())


def uniform_bitstring(n: int, rng: RandomSource) -> BitString:
    """Uniform random bit string; bit ``64*w + j`` is bit ``j`` of the ``w``-th draw."""
    if n < 1:
        raise ValueError(f"bit string length must be positive, got {n}")
    words = np.array([rng.next_u64() for _ in range((n + 63) // 64)], dtype="<u8")
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:n]
    return BitString(bits)


def hamming_distance(x: BitString, y: BitString) -> int:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    return int(np.count_nonzero(x.bits != y.bits))


# ---------------------------------------------------------------------------
# Binomial law
# ---------------------------------------------------------------------------


def sample_binomial(n: int, p: float, rng: RandomSource) -> int:
    """Exact inverse-transform draw from B(n, p) using one uniform.

    For ``n*p <= 64`` the pmf recurrence runs on plain doubles starting from
    ``(1-p)**n``; above that (or if ``(1-p)**n`` underflows) it runs on log
    probabilities.  Degenerate ``p`` in {0, 1} consumes no randomness.
    """
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if n < 0:
        raise ValueError(f"number of trials must be non-negative, got {n}")
    if p == 0.0 or n == 0:
        return 0
    if p == 1.0:
        return n
    u = rng.random()
    if n * p <= BINOMIAL_DIRECT_MEAN_LIMIT:
        pmf = math.exp(n * math.log1p(-p))
        if pmf > 0.0:
            ratio = p / (1.0 - p)
            k = 0
            cdf = pmf
            while u >= cdf and k < n:
                pmf *= (n - k) / (k + 1.0) * ratio
                k += 1
                cdf += pmf
            return k
    lp = n * math.log1p(-p)
    r = math.log(p) - math.log1p(-p)
    cdf = 0.0
    k = 0
    while True:
        cdf += math.exp(lp)
        if u < cdf or k == n:
            return k
        lp += math.log((n - k) / (k + 1.0)) + r
        k += 1


def binomial_coefficient(n: int, k: int) -> int:
    """Exact C(n, k); zero when ``k < 0`` or ``k > n``."""
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)
