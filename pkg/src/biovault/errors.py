"""Exception types shared across the package.

Every domain error derives from :class:`BiovaultError` so the CLI can map any
expected failure to exit code 1 while real bugs escape loudly.
"""

from __future__ import annotations


class BiovaultError(Exception):
    """Base class for all expected domain failures."""


# content store

class StorageFull(BiovaultError):
    """The store's configured capacity would be exceeded."""


class NotFound(BiovaultError):
    """No object/transaction exists under the requested key."""


class IntegrityViolation(BiovaultError):
    """Stored bytes no longer hash to their content id."""


class AuthenticationFailed(BiovaultError):
    """AEAD envelope rejected: wrong key, tampered bytes, or not an envelope."""


# ledger

class DuplicateTransaction(BiovaultError):
    pass


class StaleParent(BiovaultError):
    """previous_hash does not match the current chain tip."""


class UnknownTransaction(BiovaultError):
    pass


class UnknownUser(BiovaultError):
    pass


# consensus

class NoEligibleMiner(BiovaultError):
    pass


# neural kernel

class KernelTooLarge(BiovaultError):
    """Kernel dimensions exceed the input's."""


class DimensionMismatch(BiovaultError):
    pass


# face pipeline

class ImageTooSmall(BiovaultError):
    pass


class DegenerateLandmarks(BiovaultError):
    """Landmark constellation carries no usable geometry (all points coincide)."""


class DegenerateImage(BiovaultError):
    """Pixel variance too small to normalize."""


class ZeroEmbedding(BiovaultError):
    """Embedding vector vanished before normalization."""


class UnsupportedFormat(BiovaultError):
    """Media file is not in the narrow supported encoding."""


# voice pipeline

class SignalTooShort(BiovaultError):
    pass


class TooFewFrames(BiovaultError):
    pass


class DegenerateFrame(BiovaultError):
    """Frame has no energy (or no usable resonance structure)."""


class TooFewPoints(BiovaultError):
    pass


class InsufficientAudio(BiovaultError):
    pass


class DuplicateUser(BiovaultError):
    pass


class EmptyDatabase(BiovaultError):
    pass


class SingularStatistics(BiovaultError):
    """Adaptation statistics are singular even after ridge regularization."""


class FeatureConfigMismatch(BiovaultError):
    """Sample features were extracted under a different config than the model's."""
