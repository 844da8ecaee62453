"""Hashing, Ed25519 signatures and binary Merkle trees.

Merkle convention: leaves are 32-byte digests; at each level an odd trailing
node is paired with itself; parent = sha256(left || right). The root of a
single-leaf tree is the leaf itself. Proofs list siblings bottom-up and the
path direction comes from the bits of the leaf index.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

DIGEST_SIZE = 32
ADDRESS_SIZE = 20
PUBKEY_SIZE = 32
SIGNATURE_SIZE = 64
ZERO_DIGEST = bytes(DIGEST_SIZE)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def address_of(public_key: bytes) -> bytes:
    return sha256(public_key)[:ADDRESS_SIZE]


@dataclass(frozen=True)
class KeyPair:
    secret_key: Ed25519PrivateKey
    public_key: bytes

    @property
    def address(self) -> bytes:
        return address_of(self.public_key)

    def sign(self, message: bytes) -> bytes:
        return sign(self.secret_key, message)

    def __repr__(self) -> str:
        return f"KeyPair(address={self.address.hex()})"


def keygen(seed: bytes) -> KeyPair:
    """Deterministic key pair from a 32-byte seed."""
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    sk = Ed25519PrivateKey.from_private_bytes(seed)
    pk = sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return KeyPair(sk, pk)


def keygen_from_label(label: str) -> KeyPair:
    """Convenience for simulations: seed = sha256(label)."""
    return keygen(sha256(label.encode()))


def sign(secret_key: Ed25519PrivateKey, message: bytes) -> bytes:
    return secret_key.sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    if len(public_key) != PUBKEY_SIZE or len(signature) != SIGNATURE_SIZE:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


class EmptyTree(ValueError):
    pass


@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    siblings: tuple[bytes, ...]
    leaf_count: int


def tree_depth(leaf_count: int) -> int:
    return (leaf_count - 1).bit_length() if leaf_count > 1 else 0


def _next_level(level: list[bytes]) -> list[bytes]:
    if len(level) % 2:
        level = level + [level[-1]]
    return [sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]


def merkle_root(leaves: list[bytes]) -> bytes:
    if not leaves:
        raise EmptyTree("merkle tree needs at least one leaf")
    level = list(leaves)
    while len(level) > 1:
        level = _next_level(level)
    return level[0]


def merkle_prove(leaves: list[bytes], index: int) -> MerkleProof:
    if not leaves:
        raise EmptyTree("merkle tree needs at least one leaf")
    if not 0 <= index < len(leaves):
        raise IndexError(f"leaf index {index} out of range for {len(leaves)} leaves")
    siblings = []
    level, i = list(leaves), index
    while len(level) > 1:
        partner = i ^ 1
        siblings.append(level[partner] if partner < len(level) else level[i])
        level = _next_level(level)
        i //= 2
    return MerkleProof(index, tuple(siblings), len(leaves))


def merkle_verify(root: bytes, leaf: bytes, proof: MerkleProof) -> bool:
    n, i = proof.leaf_count, proof.leaf_index
    if n < 1 or not 0 <= i < n or len(proof.siblings) != tree_depth(n):
        return False
    node, width = leaf, n
    for sib in proof.siblings:
        if len(sib) != DIGEST_SIZE:
            return False
        # the last node of an odd-width level must be paired with itself
        if i == width - 1 and i % 2 == 0 and sib != node:
            return False
        node = sha256(node + sib) if i % 2 == 0 else sha256(sib + node)
        i //= 2
        width = (width + 1) // 2
    return node == root
