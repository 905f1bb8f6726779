"""Privacy extension: additively homomorphic aggregate counting.

A coordinator can learn *how many* domains hold policy-relevant facts without
learning *which* domains do: each domain returns its boolean predicate answer
encrypted under the coordinator's Paillier public key, and the ciphertexts
are combined homomorphically so only the sum ever gets decrypted.

The zero-knowledge predicate-proof interface is declared but intentionally
not implemented; both entry points raise :class:`NotImplementedError`.
"""

from __future__ import annotations

import base64
import hashlib
import json
import secrets
from dataclasses import dataclass
from math import gcd
from typing import Any, Iterable, Optional

DEFAULT_KEY_BITS = 2048
TEST_KEY_BITS = 512

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


class InputError(ValueError):
    pass


class PlaintextRange(InputError):
    """Plaintext is outside [0, n)."""


def _is_probable_prime(n: int, rounds: int = 40) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = secrets.randbelow(n - 3) + 2
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int) -> int:
    while True:
        candidate = secrets.randbits(bits) | (1 << (bits - 1)) | 1
        if _is_probable_prime(candidate):
            return candidate


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int

    @property
    def n_sq(self) -> int:
        return self.n * self.n

    @property
    def g(self) -> int:
        return self.n + 1

    def encrypt(self, plaintext: int, r: Optional[int] = None) -> int:
        if not isinstance(plaintext, int):
            raise InputError(f"plaintext must be an int, got {type(plaintext).__name__}")
        m = int(plaintext)
        if not 0 <= m < self.n:
            raise PlaintextRange(f"plaintext must lie in [0, n), got {m}")
        if r is None:
            while True:
                r = secrets.randbelow(self.n - 1) + 1
                if gcd(r, self.n) == 1:
                    break
        elif not (0 < r < self.n and gcd(r, self.n) == 1):
            raise InputError("randomness must be a unit modulo n")
        # with g = n + 1, g^m mod n^2 == 1 + m*n, so no big exponentiation
        return ((1 + m * self.n) % self.n_sq) * pow(r, self.n, self.n_sq) % self.n_sq

    def add(self, c1: int, c2: int) -> int:
        """Ciphertext of the sum of the underlying plaintexts."""
        self._check_cipher(c1)
        self._check_cipher(c2)
        return c1 * c2 % self.n_sq

    def scale(self, c: int, k: int) -> int:
        """Ciphertext of k times the underlying plaintext."""
        self._check_cipher(c)
        if not isinstance(k, int) or k < 0:
            raise InputError("scalar must be a non-negative int")
        return pow(c, k, self.n_sq)

    def _check_cipher(self, c: int) -> None:
        if not isinstance(c, int) or not 0 < c < self.n_sq:
            raise InputError("ciphertext must lie in (0, n^2)")


@dataclass(frozen=True)
class PaillierPrivateKey:
    public_key: PaillierPublicKey
    lam: int   # lcm(p-1, q-1)
    mu: int    # (L(g^lam mod n^2))^-1 mod n

    def decrypt(self, ciphertext: int) -> int:
        self.public_key._check_cipher(ciphertext)
        n = self.public_key.n
        u = pow(ciphertext, self.lam, self.public_key.n_sq)
        return (u - 1) // n * self.mu % n


def generate_keypair(bits: int = DEFAULT_KEY_BITS) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    if bits < 128:
        raise InputError(f"key size {bits} is too small")
    half = bits // 2
    while True:
        p = _random_prime(half)
        q = _random_prime(bits - half)
        if p != q and gcd(p * q, (p - 1) * (q - 1)) == 1:
            break
    n = p * q
    public = PaillierPublicKey(n)
    lam = (p - 1) * (q - 1) // gcd(p - 1, q - 1)
    u = pow(public.g, lam, public.n_sq)
    mu = pow((u - 1) // n, -1, n)
    return public, PaillierPrivateKey(public, lam, mu)


def _cipher_to_b64(c: int) -> str:
    data = c.to_bytes((c.bit_length() + 7) // 8 or 1, "big")
    return base64.b64encode(data).decode("ascii")


def _cipher_from_b64(text: str) -> int:
    return int.from_bytes(base64.b64decode(text), "big")


def he_aggregate_count(public: PaillierPublicKey, encrypted_flags: Iterable[int],
                       manifest: Optional[dict[str, Any]] = None) -> dict[str, Any]:
    """Combine per-domain encrypted boolean flags into one aggregate ciphertext.

    Returns a transcript the coordinator can store for audit: the manifest
    hash binding the query set, the contributing ciphertexts, and the
    homomorphic sum.  Only the sum is ever decrypted.
    """
    flags = list(encrypted_flags)
    if not flags:
        raise InputError("aggregate needs at least one contribution")
    total = flags[0]
    public._check_cipher(total)
    for cipher in flags[1:]:
        total = public.add(total, cipher)
    manifest_blob = json.dumps(manifest or {}, sort_keys=True, separators=(",", ":"))
    return {
        "manifest_hash": hashlib.sha256(manifest_blob.encode("utf-8")).hexdigest(),
        "ciphertexts": [_cipher_to_b64(c) for c in flags],
        "response": _cipher_to_b64(total),
    }


def decrypt_aggregate(private: PaillierPrivateKey, transcript: dict[str, Any]) -> int:
    return private.decrypt(_cipher_from_b64(transcript["response"]))


def zk_predicate_prove(statement: dict[str, Any], witness: dict[str, Any]) -> bytes:
    """Produce a proof that a predicate answer is consistent with the graph
    commitment, without revealing the graph.  Not implemented in this release."""
    raise NotImplementedError(
        "zero-knowledge predicate proofs are a declared interface only; "
        "no proving backend ships in this release"
    )


def zk_predicate_verify(statement: dict[str, Any], proof: bytes) -> bool:
    """Verify a zero-knowledge predicate proof.  Not implemented in this release."""
    raise NotImplementedError(
        "zero-knowledge predicate proofs are a declared interface only; "
        "no verification backend ships in this release"
    )
