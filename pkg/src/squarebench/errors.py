"""Exception types shared across the harness.

Every error raised on purpose by this package derives from SquarebenchError,
so callers can catch one base class at the CLI boundary.
"""


class SquarebenchError(Exception):
    """Base class for all errors raised by squarebench."""


class DatasetIOError(SquarebenchError):
    """Dataset file could not be read or written."""


class RecordInvalidError(SquarebenchError):
    """A dataset line failed validation; the message carries the line number."""


class GoldKindMismatchError(SquarebenchError):
    """Record gold labels do not match the kind the caller declared."""


class SampleTooLargeError(SquarebenchError):
    """Requested sample size exceeds the number of records."""


class TemplateStoreError(SquarebenchError):
    """Prompt template directory is missing files or contains bad data."""


class ContextsForbiddenError(SquarebenchError):
    """Context passages were supplied to a strategy that takes none."""


class ContextsRequiredError(SquarebenchError):
    """A context-consuming strategy was invoked with no passages."""


class BackendError(SquarebenchError):
    """Base class for chat-completion backend failures."""


class TransientBackendError(BackendError):
    """Timeout, rate limit, or server error that persisted past the retry budget."""


class AuthError(BackendError):
    """Backend rejected our credentials; retrying will not help."""


class MalformedResponseError(BackendError):
    """Backend answered with something that is not a usable chat completion."""


class CacheIOError(SquarebenchError):
    """Cache entry could not be written."""


class EmptyInputError(SquarebenchError):
    """An aggregate was requested over zero items."""


class ConfigError(SquarebenchError):
    """Experiment config file is missing, malformed, or inconsistent."""


class RunFailedError(SquarebenchError):
    """A record failed during an experiment run and partial results were not allowed."""


class LayoutMismatchError(SquarebenchError):
    """Results handed to the report renderer do not fit the requested layout."""
