## The root of every error raised by this package.
## Each module defines its own specific errors next to the code that raises
## them; they all derive from this class so the command line can tell a
## runtime failure (exit code 1) from a programming error.
class UmAucError(Exception):
    pass

## Raised when an argument is outside the documented range.
class InvalidParameterError(UmAucError, ValueError):
    pass
