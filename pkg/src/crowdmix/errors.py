"""Exception types raised across the engine.

Every error carries a stable ``code`` (its class name) that the wire
protocol and the CLI map to error replies / exit codes.
"""


class CrowdmixError(Exception):
    """Base class for all engine errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# canvas
class ElementNotFound(CrowdmixError):
    pass


class DuplicateElement(CrowdmixError):
    pass


class InvalidValue(CrowdmixError):
    pass


class EmptyChannel(CrowdmixError):
    pass


# recorder
class NotRecording(CrowdmixError):
    pass


class ForeignWorkerEvent(CrowdmixError):
    pass


class EmptyBuffer(CrowdmixError):
    pass


class StructuralBlock(CrowdmixError):
    """A transform-only operation was applied to a create/delete block."""


# remix / timeline
class InvalidRange(CrowdmixError):
    pass


class UnknownBlock(CrowdmixError):
    pass


class NegativeOffset(CrowdmixError):
    pass


class UnknownItem(CrowdmixError):
    pass


class ConflictError(CrowdmixError):
    def __init__(self, message, conflicts=()):
        super().__init__(message)
        self.conflicts = list(conflicts)


class TargetMissing(CrowdmixError):
    pass


class DeleteMissing(CrowdmixError):
    pass


# behavior store
class DuplicateName(CrowdmixError):
    pass


class InvalidName(CrowdmixError):
    pass


class NotCompiled(CrowdmixError):
    pass


class EmptyDoc(CrowdmixError):
    pass


class UnknownElement(CrowdmixError):
    pass


class SchemaMismatch(CrowdmixError):
    pass


class DanglingReference(CrowdmixError):
    pass


# session server
class DuplicateWorker(CrowdmixError):
    pass


class UnknownSession(CrowdmixError):
    pass


class UnknownBehavior(CrowdmixError):
    pass


class NotHolder(CrowdmixError):
    pass


class LockRequired(CrowdmixError):
    pass


class ValidationFailed(CrowdmixError):
    """Wraps any rejection of a submitted protocol message.

    ``cause`` is the code of the underlying error (e.g. "LockRequired").
    """

    def __init__(self, message, cause="ValidationFailed"):
        super().__init__(message)
        self.cause = cause
