"""Exception hierarchy. Each class carries the CLI exit code it maps to."""

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_CANNOT_SPLIT = 4
EXIT_SPEC = 5


class RhoPerfectError(Exception):
    exit_code = 1


class IngestError(RhoPerfectError):
    """Unreadable file, missing columns, or a malformed row in fail-fast mode."""

    exit_code = EXIT_PARSE


class ShapeError(RhoPerfectError):
    exit_code = EXIT_PARSE


class EmptyIntersection(RhoPerfectError):
    exit_code = EXIT_PARSE


class DegenerateVariance(RhoPerfectError):
    exit_code = EXIT_DEGENERATE


class EmptyItem(DegenerateVariance):
    pass


class TooFewItems(DegenerateVariance):
    pass


class UndefinedConditionalVariance(DegenerateVariance):
    def __init__(self, msg, item_ids=()):
        super().__init__(msg)
        self.item_ids = list(item_ids)


class CannotBalance(DegenerateVariance):
    pass


class CannotSplit(RhoPerfectError):
    exit_code = EXIT_CANNOT_SPLIT

    def __init__(self, msg, item_ids=()):
        super().__init__(msg)
        self.item_ids = list(item_ids)


class SpecError(RhoPerfectError):
    exit_code = EXIT_SPEC
