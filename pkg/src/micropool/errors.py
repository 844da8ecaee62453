"""Exception hierarchy. Ledger errors double as Rejected receipt reasons."""


class MicropoolError(Exception):
    pass


class LedgerError(MicropoolError):
    pass


class InvalidSignature(LedgerError):
    pass


class UnknownAccount(LedgerError):
    pass


class DuplicateTx(LedgerError):
    pass


class InsufficientBalance(LedgerError):
    pass


class CollateralTooSmall(LedgerError):
    pass


class ZeroDuration(LedgerError):
    pass


class InvalidAmount(LedgerError):
    pass


class PoolNotFound(LedgerError):
    pass


class PoolNotActive(LedgerError):
    pass


class TimelockExpired(LedgerError):
    pass


class TimelockNotExpired(LedgerError):
    pass


class WrongSubmitter(LedgerError):
    pass


class NotCreator(LedgerError):
    pass


class StaleSequence(LedgerError):
    """tgtSeq does not match the pool's counter: the replay case."""


class NonPositiveIncrement(LedgerError):
    pass


class UneconomicalSettlement(LedgerError):
    pass


class TxNotCommitted(LedgerError):
    pass


class ChannelNotFound(LedgerError):
    pass


class ChannelNotOpen(LedgerError):
    pass


class BalancesDontSum(LedgerError):
    pass


class StaleCommitment(LedgerError):
    """Channel close with a commitment sequence not above the last one seen."""


class ProtocolError(MicropoolError):
    pass


class DepositExhausted(ProtocolError):
    pass


class DepositTooSmall(ProtocolError):
    pass


class NotHandshaked(ProtocolError):
    pass


class Blacklisted(ProtocolError):
    pass


class NonMonotonePayment(ProtocolError):
    pass


class NotOpen(ProtocolError):
    pass


class TooFewPeers(ProtocolError):
    pass


class NonMonotoneAmount(ProtocolError):
    pass


class ReceiptRejected(ProtocolError):
    pass


class BadReceiptSignature(ReceiptRejected):
    pass


class UnauthorizedPair(ReceiptRejected):
    pass


class StaleReceipt(ReceiptRejected):
    pass


class CertExpired(ReceiptRejected):
    pass
