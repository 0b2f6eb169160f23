"""Exception types raised across the package."""

from __future__ import annotations


class Od3dError(Exception):
    """Base class for all data errors raised by od3d."""


class ParseError(Od3dError, ValueError):
    def __init__(self, reason: str, line_no: int | None = None) -> None:
        self.reason = reason
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{reason}")


class RegistryError(Od3dError, ValueError):
    pass


class UnknownICError(Od3dError, KeyError):
    """One or more IC ids could not be resolved against the registry."""

    def __init__(self, ids, count: int | None = None) -> None:
        self.ids = sorted(set(ids))
        self.count = len(self.ids) if count is None else count
        sample = ", ".join(self.ids[:5])
        more = "" if len(self.ids) <= 5 else f" (+{len(self.ids) - 5} more ids)"
        super().__init__(f"{self.count} reference(s) to unknown IC ids: {sample}{more}")

    def __str__(self) -> str:
        return self.args[0]


class CountOverflowError(Od3dError, OverflowError):
    pass


class MetadataMismatchError(Od3dError, ValueError):
    pass


class InvalidRangeError(Od3dError, ValueError):
    pass


class WindowMismatchError(Od3dError, ValueError):
    pass


class TensorFormatError(Od3dError):
    """A tensor file could not be decoded."""


class BadMagicError(TensorFormatError):
    pass


class VersionMismatchError(TensorFormatError):
    pass


class TruncatedFileError(TensorFormatError):
    pass


class ChecksumError(TensorFormatError):
    pass
