"""Exception types shared across the toolkit."""


class MirkitError(Exception):
    """Base class for all toolkit errors."""


# --- audio i/o ---

class UnsupportedFormat(MirkitError):
    """Audio container or codec we do not decode."""


class CorruptHeader(MirkitError):
    """File claims to be RIFF/WAVE but the header does not parse."""


class AliasedFrequency(MirkitError):
    """Requested synthesis frequency at or above Nyquist."""


class BpmOutOfRange(MirkitError):
    """Tempo outside the supported 30-300 BPM range."""


# --- dsp ---

class EmptySignal(MirkitError):
    """Input too short to produce a single analysis frame."""


class InsufficientResolution(MirkitError):
    """Linear-frequency resolution too coarse for the requested log bins."""


class WrongBinning(MirkitError):
    """Log-frequency spectrogram was not built with 12 bins per octave."""


class LagTooLarge(MirkitError):
    """Autocorrelation lag exceeds the signal length."""


# --- harmony / rhythm / vocals ---

class SilentInput(MirkitError):
    """No voiced frames to analyze."""


class TooShort(MirkitError):
    """Input shorter than the minimum duration for this analysis."""


class NoPeriodicity(MirkitError):
    """Onset envelope shows no usable periodicity in the tempo range."""


class TooFewBeats(MirkitError):
    """Not enough beats to infer a bar phase."""


class MissingFeature(MirkitError):
    """A required feature value is absent from the feature map."""


# --- framework ---

class InvalidRecord(MirkitError):
    """A FeatureRecord violates one of its invariants."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"invalid record field: {field}")


class DuplicateId(MirkitError):
    """Extractor id already present in the registry."""


class UnknownExtractor(MirkitError):
    """Extractor id not present in the registry."""


class ConfigInvalid(MirkitError):
    """Pipeline configuration failed validation before any processing."""


class OutputUnwritable(MirkitError):
    """Report destination cannot be written."""


# --- evaluation ---

class OverlappingSegments(MirkitError):
    """Segment list contains overlapping spans."""


class NoOverlap(MirkitError):
    """No report file matches any annotation."""


# --- plugin bridge ---

class SpawnFailed(MirkitError):
    """Plugin process could not be launched."""


class HandshakeTimeout(MirkitError):
    """Plugin did not complete the handshake in time."""


class ProtocolViolation(MirkitError):
    """Plugin sent a message that breaks the wire protocol."""


class PluginError(MirkitError):
    """Plugin reported an error for a request."""


class PluginBadRecord(MirkitError):
    """Plugin returned a record violating FeatureRecord invariants."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(message or f"plugin record invalid: {field}")


class PluginTimeout(MirkitError):
    """Plugin did not answer a request in time; handle is dead."""


class BrokenPipe(MirkitError):
    """Plugin process ended mid-conversation; handle is dead."""


class DeadHandle(MirkitError):
    """Request made on a plugin handle that is already dead."""
