"""Resource-oriented micropayment pools for peer-assisted streaming."""
from .crypto import KeyPair, keygen, merkle_prove, merkle_root, merkle_verify, sha256, sign, verify
from .ledger import Ledger, LedgerConfig, PoolState, PoolStatus
from .payment import ServicePayment, serialize_for_signing

__version__ = "0.1.0"
