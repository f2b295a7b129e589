"""Exception hierarchy shared by every stage of the pipeline."""


class VoiceClefError(Exception):
    """Base class for all library errors."""


# audio
class MalformedHeader(VoiceClefError):
    pass


class UnsupportedEncoding(VoiceClefError):
    pass


class EmptyData(VoiceClefError):
    pass


class IoFailure(VoiceClefError):
    pass


# preprocessing
class ClipTooShort(VoiceClefError):
    pass


# features
class SignalTooShort(VoiceClefError):
    pass


class DimensionMismatch(VoiceClefError):
    pass


class NotPowerOfTwo(VoiceClefError):
    pass


class TooManyFilters(VoiceClefError):
    pass


class OrderTooHigh(VoiceClefError):
    pass


class TooFewFrames(VoiceClefError):
    pass


class ArchiveError(VoiceClefError):
    pass


# network
class ShapeMismatch(VoiceClefError):
    pass


class IndexOutOfRange(VoiceClefError):
    pass


class NoForwardPass(VoiceClefError):
    pass


class InvalidArch(VoiceClefError):
    pass


class EmptyDataset(VoiceClefError):
    pass


class DivergedLoss(VoiceClefError):
    pass


class BadMagic(VoiceClefError):
    pass


class VersionMismatch(VoiceClefError):
    pass


class TruncatedFile(VoiceClefError):
    pass


# metrics
class LabelOutOfRange(VoiceClefError):
    pass


class DegenerateLabels(VoiceClefError):
    pass


class EmptyVoteSet(VoiceClefError):
    pass


# dataset
class ManifestError(VoiceClefError):
    """Base for manifest validation failures."""


class MissingColumn(ManifestError):
    pass


class UnknownLabel(ManifestError):
    pass


class DuplicatePath(ManifestError):
    pass


class UnreadableFile(ManifestError):
    pass


class EmptyResult(ManifestError):
    pass


class RootNotFound(ManifestError):
    pass


class NoMatchingFiles(ManifestError):
    pass


class UnmappedDiagnosis(ManifestError):
    pass


class ConfigError(VoiceClefError):
    pass
