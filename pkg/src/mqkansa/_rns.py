"""Exact big-integer matrix products on top of float64 BLAS.

Integers are reduced modulo a set of primes below 2**22 (symmetric residues
fit in 21 bits), multiplied prime by prime with ``numpy.matmul`` where every
partial sum stays below 2**53, and reassembled with the Chinese remainder
theorem.  The reassembly works on 16-bit limbs held in float64/int64 arrays so
no per-entry Python big-integer arithmetic is needed except for the final
``int.from_bytes``.

Everything here is exact integer arithmetic; BLAS threading cannot change a
result.
"""
from __future__ import annotations

import functools
import math

import numpy as np

PRIME_BITS = 22
LIMB_BITS = 16
# k * (2**21)**2 < 2**53
MAX_INNER = 2048
# entries per CRT / residue block
_BLOCK = 8192

_LIMB_MASK = (1 << LIMB_BITS) - 1


@functools.lru_cache(maxsize=1)
def _prime_pool() -> tuple[int, ...]:
    """Primes just below 2**22, largest first."""
    hi = 1 << PRIME_BITS
    lo = hi - (1 << 16)
    sieve = np.ones(hi - lo, dtype=bool)
    for p in range(2, math.isqrt(hi) + 1):
        start = max(p * p, ((lo + p - 1) // p) * p)
        sieve[start - lo::p] = False
    return tuple(int(lo + i) for i in np.flatnonzero(sieve)[::-1])


class Basis:
    """CRT tables for the first ``count`` primes of the pool."""

    def __init__(self, count: int):
        pool = _prime_pool()
        if count > len(pool):
            raise ValueError(f"at most {len(pool)} primes available, {count} requested")
        primes = pool[:count]
        self.count = count
        self.primes_int = primes
        self.p = np.array(primes, dtype=np.float64)
        self.inv_p = 1.0 / self.p
        modulus = math.prod(primes)
        self.modulus = modulus
        self.modulus_bits = modulus.bit_length()
        cofactors = [modulus // q for q in primes]
        self.inv = np.array([pow(c % q, -1, q) for c, q in zip(cofactors, primes)],
                            dtype=np.float64)
        self.nlimbs = (self.modulus_bits + LIMB_BITS) // LIMB_BITS + 2
        nbytes = 2 * self.nlimbs
        buf = b"".join(c.to_bytes(nbytes, "little") for c in cofactors)
        # (limbs x primes)
        self.cofactor_limbs = np.frombuffer(buf, dtype="<u2").reshape(count, self.nlimbs).T.astype(np.float64)
        self.modulus_limbs = np.frombuffer(modulus.to_bytes(nbytes, "little"), dtype="<u2").astype(np.int64)

    @functools.lru_cache(maxsize=8)
    def limb_weights(self, nlimbs: int) -> tuple[np.ndarray, np.ndarray]:
        """(2**(16 l) mod p) as a (nlimbs x primes) table, and 2**(16 nlimbs) mod p."""
        w = np.empty((nlimbs, self.count), dtype=np.float64)
        for i, q in enumerate(self.primes_int):
            col = [pow(2, LIMB_BITS * l, q) for l in range(nlimbs)]
            w[:, i] = col
        w = w - np.round(w / self.p) * self.p
        wrap = np.array([pow(2, LIMB_BITS * nlimbs, q) for q in self.primes_int], dtype=np.float64)
        return w, wrap


@functools.lru_cache(maxsize=16)
def basis_for_bits(bits: int) -> Basis:
    """Smallest cached basis whose modulus exceeds 2**(bits + 3)."""
    # primes are > 2**21.99, round the count up to a multiple of 8 to share caches
    count = math.ceil((bits + 4) / (PRIME_BITS - 0.01))
    count = -(-count // 8) * 8
    b = Basis(count)
    while b.modulus_bits < bits + 4:
        count += 8
        b = Basis(count)
    return b


def residues_from_bytes(buf: bytes, nbytes: int, basis: Basis) -> np.ndarray:
    """Symmetric residues of little-endian two's-complement integers.

    ``buf`` holds consecutive ``nbytes``-byte integers.  Returns a float32
    array of shape (primes, entries); |r| < 2**21 is exact in float32.
    """
    nlimbs = nbytes // 2
    n = len(buf) // nbytes
    w, wrap = basis.limb_weights(nlimbs)
    out = np.empty((basis.count, n), dtype=np.float32)
    limbs_all = np.frombuffer(buf, dtype="<u2").reshape(n, nlimbs)
    for s in range(0, n, _BLOCK):
        limbs = limbs_all[s:s + _BLOCK]
        r = limbs.astype(np.float64) @ w
        neg = limbs[:, -1] >= 0x8000
        if neg.any():
            r[neg] -= wrap
        r -= np.round(r * basis.inv_p) * basis.p
        out[:, s:s + len(limbs)] = r.T
    return out


def crt_to_ints(res: np.ndarray, basis: Basis, drop_limbs: int = 0) -> list[int]:
    """Recover signed integers from residues of shape (primes, entries).

    The true values must satisfy ``|x| < modulus / 8``.  With ``drop_limbs``
    the low ``16 * drop_limbs`` bits are discarded: the result is
    ``x / 2**(16 * drop_limbs)`` up to an absolute error below 2**40 units of
    the kept part (the lost carries of the discarded limbs).
    """
    p = basis.p[:, None]
    y = res.astype(np.float64)
    y -= np.floor(y / p) * p
    y *= basis.inv[:, None]
    y -= np.floor(y / p) * p
    q = np.round(basis.inv_p @ y)
    limbs = basis.cofactor_limbs[drop_limbs:] @ y
    x = limbs.astype(np.int64)
    x -= np.outer(basis.modulus_limbs[drop_limbs:], q.astype(np.int64))
    _propagate_carries(x)
    nb = 2 * x.shape[0]
    raw = np.ascontiguousarray(x.T).astype("<u2").tobytes()
    mv = memoryview(raw)
    frm = int.from_bytes
    return [frm(mv[i:i + nb], "little", signed=True) for i in range(0, len(raw), nb)]


def _propagate_carries(x: np.ndarray) -> None:
    # in-place: limbs 0..L-2 end in [0, 2**16), the top limb keeps the sign
    body = x[:-1]
    while True:
        c = body >> LIMB_BITS
        if not c.any():
            break
        body -= c << LIMB_BITS
        x[1:] += c


def int_matmul_residues(ra: np.ndarray, rb: np.ndarray, basis: Basis) -> np.ndarray:
    """Residues of ``A @ B`` from residues ra (primes, m, k) and rb (primes, k, n)."""
    count, m, k = ra.shape
    n = rb.shape[2]
    out = np.empty((count, m, n), dtype=np.float64)
    for i in range(count):
        acc = None
        for s in range(0, k, MAX_INNER):
            a = ra[i, :, s:s + MAX_INNER].astype(np.float64)
            b = rb[i, s:s + MAX_INNER, :].astype(np.float64)
            prod = a @ b
            acc = prod if acc is None else acc + prod
            if k > MAX_INNER:
                acc -= np.round(acc / basis.p[i]) * basis.p[i]
        out[i] = acc
    return out


def int_matmul(a: list[list[int]], b: list[list[int]]) -> list[list[int]]:
    """Exact product of two integer matrices given as nested lists (test helper)."""
    m, k, n = len(a), len(b), len(b[0])
    amax = max((abs(v) for row in a for v in row), default=0)
    bmax = max((abs(v) for row in b for v in row), default=0)
    bits = amax.bit_length() + bmax.bit_length() + max(k, 1).bit_length() + 1
    basis = basis_for_bits(bits)
    nbytes_a = 2 * ((amax.bit_length() + LIMB_BITS + 1) // LIMB_BITS)
    nbytes_b = 2 * ((bmax.bit_length() + LIMB_BITS + 1) // LIMB_BITS)
    ra = residues_from_bytes(b"".join(v.to_bytes(nbytes_a, "little", signed=True)
                                      for row in a for v in row), nbytes_a, basis)
    rb = residues_from_bytes(b"".join(v.to_bytes(nbytes_b, "little", signed=True)
                                      for row in b for v in row), nbytes_b, basis)
    prod = int_matmul_residues(ra.reshape(basis.count, m, k), rb.reshape(basis.count, k, n), basis)
    flat = crt_to_ints(prod.reshape(basis.count, m * n), basis)
    return [flat[i * n:(i + 1) * n] for i in range(m)]
