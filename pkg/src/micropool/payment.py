"""The off-chain ServicePayment message and its canonical encodings.

Signing bytes (68): target(20) || amount(u64) || cptxHash(32) || tgtSeq(u64).
Wire bytes (133): 0x01 || signing bytes || sigma(64).
"""
from __future__ import annotations

from dataclasses import dataclass

from . import codec
from .crypto import ADDRESS_SIZE, DIGEST_SIZE, SIGNATURE_SIZE, KeyPair

TAG_SERVICE_PAYMENT = 0x01


def serialize_for_signing(target: bytes, amount: int, cptx_hash: bytes, tgt_seq: int) -> bytes:
    if len(target) != ADDRESS_SIZE or len(cptx_hash) != DIGEST_SIZE:
        raise ValueError("target must be 20 bytes and cptx_hash 32 bytes")
    return target + codec.u64(amount) + cptx_hash + codec.u64(tgt_seq)


@dataclass(frozen=True)
class ServicePayment:
    target: bytes
    amount: int
    cptx_hash: bytes
    tgt_seq: int
    sigma: bytes

    @classmethod
    def signed(cls, keys: KeyPair, target: bytes, amount: int, cptx_hash: bytes, tgt_seq: int) -> ServicePayment:
        msg = serialize_for_signing(target, amount, cptx_hash, tgt_seq)
        return cls(target, amount, cptx_hash, tgt_seq, keys.sign(msg))

    def signing_bytes(self) -> bytes:
        return serialize_for_signing(self.target, self.amount, self.cptx_hash, self.tgt_seq)

    def encode(self) -> bytes:
        return codec.u8(TAG_SERVICE_PAYMENT) + self.signing_bytes() + self.sigma

    @classmethod
    def decode(cls, data: bytes) -> ServicePayment:
        r = codec.Reader(data)
        if r.u8() != TAG_SERVICE_PAYMENT:
            raise codec.DecodeError("not a ServicePayment")
        sp = cls._read(r)
        r.done()
        return sp

    @classmethod
    def _read(cls, r: codec.Reader) -> ServicePayment:
        target = r.take(ADDRESS_SIZE)
        amount = r.u64()
        cptx = r.take(DIGEST_SIZE)
        seq = r.u64()
        sigma = r.take(SIGNATURE_SIZE)
        return cls(target, amount, cptx, seq, sigma)

    def __repr__(self) -> str:
        return (f"ServicePayment(target={self.target.hex()[:8]}, amount={self.amount}, "
                f"cptx={self.cptx_hash.hex()[:8]}, tgtSeq={self.tgt_seq})")
