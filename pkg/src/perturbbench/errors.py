"""Exception types shared across the toolkit."""


class PerturbBenchError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(PerturbBenchError, ValueError):
    """An argument violates an operation's contract."""


class AudioFormatError(PerturbBenchError, ValueError):
    """A WAV file uses an encoding outside the supported set."""


class ChannelCountError(AudioFormatError):
    """A WAV file is not mono."""


class StftConfigError(PerturbBenchError, ValueError):
    """An STFT configuration violates its invariants."""


class ManifestError(PerturbBenchError, ValueError):
    """A corpus manifest is malformed; message names the offending line."""


class EmptyReferenceError(PerturbBenchError, ValueError):
    """WER is undefined for an empty reference."""


class BridgeError(PerturbBenchError, RuntimeError):
    """A transcription bridge violated the wire protocol or stopped responding."""


class BridgeReplyError(BridgeError):
    """The bridge answered correctly but reported a per-request error."""
