"""Hashing, salting, and signing primitives shared by every ledger component.

The hash is SHA-256 throughout (32-byte digests). Written values are never
hashed bare: they are prefixed with a fresh 32-byte salt so that a digest on
the chain cannot be inverted by guessing low-entropy values. Signatures
default to Ed25519; the scheme is pluggable via :class:`SignatureScheme`.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

DIGEST_LEN = 32
SALT_LEN = 32

#: Digest carried by deletion writes, which have no value and no preimage.
ZERO_DIGEST = b"\x00" * DIGEST_LEN


class CryptoError(ValueError):
    """Malformed key material, salt, or other unusable cryptographic input."""


def hash_bytes(data: bytes) -> bytes:
    """SHA-256 digest of ``data``: deterministic, always 32 bytes."""
    return hashlib.sha256(data).digest()


def new_salt() -> bytes:
    """Fresh 32 uniformly random bytes, one per written key."""
    return os.urandom(SALT_LEN)


def hash_preimage(salt: bytes, value: bytes) -> bytes:
    """Digest of a salted value: SHA-256 over the 32 salt bytes followed by
    the raw value bytes. The concatenation ``salt || value`` is exactly the
    preimage stored in a block's preimage space, so
    ``hash_preimage(p[:32], p[32:]) == hash_bytes(p)`` for any stored entry.
    """
    if len(salt) != SALT_LEN:
        raise CryptoError(f"salt must be {SALT_LEN} bytes, got {len(salt)}")
    return hashlib.sha256(salt + value).digest()


@dataclass(frozen=True)
class KeyPair:
    """A signing identity: 32-byte public key (also used as the identity id
    on the wire) plus the 32-byte secret seed."""

    public: bytes
    secret: bytes


class SignatureScheme(Protocol):
    name: str

    def generate(self) -> KeyPair: ...

    def keypair_from_seed(self, seed: bytes) -> KeyPair: ...

    def sign(self, secret: bytes, message: bytes) -> bytes: ...

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool: ...


@lru_cache(maxsize=1024)
def _private_key(seed: bytes) -> Ed25519PrivateKey:
    try:
        return Ed25519PrivateKey.from_private_bytes(seed)
    except Exception as exc:
        raise CryptoError(f"malformed secret key: {exc}") from exc


@lru_cache(maxsize=1024)
def _public_key(public: bytes) -> Ed25519PublicKey:
    try:
        return Ed25519PublicKey.from_public_bytes(public)
    except Exception as exc:
        raise CryptoError(f"malformed public key: {exc}") from exc


class Ed25519Scheme:
    """Default signature scheme. Key objects are cached by raw bytes; the
    identity sets in a deployment are small and keys are immutable."""

    name = "ed25519"

    def generate(self) -> KeyPair:
        return self.keypair_from_seed(os.urandom(32))

    def keypair_from_seed(self, seed: bytes) -> KeyPair:
        sk = _private_key(bytes(seed))
        return KeyPair(public=sk.public_key().public_bytes_raw(), secret=bytes(seed))

    def sign(self, secret: bytes, message: bytes) -> bytes:
        return _private_key(secret).sign(message)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        pk = _public_key(public)
        try:
            pk.verify(signature, message)
            return True
        except InvalidSignature:
            return False


DEFAULT_SCHEME: SignatureScheme = Ed25519Scheme()


def generate_keypair() -> KeyPair:
    return DEFAULT_SCHEME.generate()


def keypair_from_seed(seed: bytes) -> KeyPair:
    """Deterministic keypair from a 32-byte seed (reproducible simulations)."""
    return DEFAULT_SCHEME.keypair_from_seed(seed)


def sign(secret: bytes, message: bytes) -> bytes:
    return DEFAULT_SCHEME.sign(secret, message)


def verify(public: bytes, message: bytes, signature: bytes) -> bool:
    """True iff ``signature`` is valid for ``message`` under ``public``.

    Malformed key material raises :class:`CryptoError`; a wrong or damaged
    signature simply returns False.
    """
    return DEFAULT_SCHEME.verify(public, message, signature)
