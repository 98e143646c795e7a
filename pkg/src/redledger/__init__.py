"""Redactable execute-order-validate permissioned ledger.

Transactions carry the salted digests of written values; the values
themselves live in a per-block preimage space that is excluded from the hash
chain and from the orderer's signature. Zeroing a preimage later (the
"right to be forgotten") destroys the data while every block hash,
signature, and replay still verifies.
"""

from .audit import AuditError, AuditReport, ReplayResult, rebuild_state, verify_chain
from .codec import DecodeError
from .committer import (
    BlockValidationReport,
    CommitError,
    Peer,
    PhaseTimes,
    RedactionError,
    ValidationConfig,
    Verdict,
    mvcc_validate,
    redaction_counters,
    resolve_write_batch,
    validate_flags,
)
from .crypto import (
    CryptoError,
    DIGEST_LEN,
    KeyPair,
    SALT_LEN,
    ZERO_DIGEST,
    generate_keypair,
    hash_bytes,
    hash_preimage,
    keypair_from_seed,
    new_salt,
    sign,
    verify,
)
from .endorser import (
    ChaincodeError,
    ChaincodeRegistry,
    CrippledKeyError,
    Endorsement,
    EndorsementError,
    Endorser,
    MismatchError,
    PolicyError,
    Proposal,
    SimulationContext,
    collect_endorsements,
    default_registry,
    derive_salt,
)
from .harness import (
    BenchResult,
    GeneratedWorkload,
    WorkloadSpec,
    bench_commit,
    forget_user,
    generate_blocks,
    load_workload,
    overhead_ratio,
    run_bench_matrix,
    write_csv,
)
from .ledgerfile import LedgerFile, LedgerFileError, read_chain
from .model import (
    Block,
    BlockHeader,
    GENESIS_PREV_HASH,
    Mode,
    NEVER_WRITTEN,
    PreimageSpace,
    ReadEntry,
    RedactionPayload,
    SignatureEntry,
    Transaction,
    TransactionEnvelope,
    TxKind,
    TxValidity,
    Version,
    WriteEntry,
    block_signing_payload,
    build_header,
    compute_block_hash,
    compute_data_hash,
    decode_block,
    decode_transaction,
    encode_block,
    encode_transaction,
    encode_transactions,
    endorsement_message,
    preimage_indexes_for_digests,
)
from .ordering import (
    AdmitResult,
    Orderer,
    OrderingConfig,
    OrderingError,
    RejectReason,
)
from .policy import EndorsementPolicy, RedactionPolicy
from .simulator import Identities, Network, derive_seed
from .statestore import (
    CommitGapError,
    StateEntry,
    StateStore,
    Status,
    TxIndex,
    TxLocation,
)

__version__ = "0.1.0"
