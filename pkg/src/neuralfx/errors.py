"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from :class:`NfxError`.
Errors that describe bad user input (config, manifest, CLI flags) also derive
from :class:`ConfigError`; the CLI maps those to exit code 2.
"""


class NfxError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(NfxError, ValueError):
    """Invalid user-supplied configuration or schema."""


# audio_io
class MalformedWav(NfxError, ValueError):
    pass


class UnsupportedFormat(NfxError, ValueError):
    pass


class SchemaError(ConfigError):
    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnknownKey(SchemaError):
    pass


class SampleRateMismatch(NfxError, ValueError):
    pass


class LengthMismatch(NfxError, ValueError):
    pass


class OutOfRange(NfxError, ValueError):
    pass


class EmptySplit(NfxError, ValueError):
    pass


# dsp
class NonPowerOfTwo(NfxError, ValueError):
    pass


class SignalTooShort(NfxError, ValueError):
    pass


class FrequencyOutOfRange(NfxError, ValueError):
    pass


class CoefficientOutOfRange(NfxError, ValueError):
    pass


# nn / models
class ShapeMismatch(NfxError, ValueError):
    pass


class UnsupportedSpec(ConfigError):
    pass


class ConditionDimMismatch(NfxError, ValueError):
    pass


class LayoutMismatch(NfxError, ValueError):
    pass


# losses / metrics / analysis
class SilentTarget(NfxError, ValueError):
    pass


class TooShort(NfxError, ValueError):
    pass


class SilentSignal(NfxError, ValueError):
    pass


class DegenerateEnergy(NfxError, ValueError):
    pass


class WindowOutOfRange(NfxError, ValueError):
    pass


# runner
class NonFiniteLoss(NfxError, RuntimeError):
    def __init__(self, step, value):
        self.step = step
        self.value = value
        super().__init__(f"non-finite training loss {value!r} at step {step}")


class VersionMismatch(NfxError, ValueError):
    pass


class CorruptPayload(NfxError, ValueError):
    pass
