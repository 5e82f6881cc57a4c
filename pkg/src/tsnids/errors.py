"""Exception hierarchy shared across the package."""


class TsnidsError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(TsnidsError):
    """Column, label or dimension contract violated."""


class IngestError(TsnidsError):
    """Input file missing, empty or malformed."""


class TrainingError(TsnidsError):
    """Optimization diverged or a model could not be fitted."""


class BundleError(TsnidsError):
    """A saved model bundle could not be read."""


class CorruptBundleError(BundleError):
    """Checksum or structural failure while reading a bundle."""


class UnsupportedVersionError(BundleError):
    """Bundle written by an incompatible format version."""
