"""Exception types raised across the package."""


class DNADMMError(Exception):
    """Base class for all package errors."""


class GraphError(DNADMMError, ValueError):
    """Invalid or unusable communication topology."""


class DegenerateCurvature(DNADMMError, ValueError):
    """Local costs are not strongly convex; raise the ridge term."""


class EmptyZetaInterval(DNADMMError, ValueError):
    """The admissible interval for the Young's-inequality weight is empty."""


class NonFiniteError(DNADMMError, FloatingPointError):
    """Iterates stopped being finite (the method diverged)."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ProtocolError(DNADMMError, RuntimeError):
    """A simulated agent violated the message-passing protocol."""


class OracleError(DNADMMError, RuntimeError):
    """The centralized oracle failed to certify its own solution."""


class MaxItersReached(DNADMMError, RuntimeError):
    """An iterative oracle ran out of iterations before reaching its tolerance."""


class DatasetError(DNADMMError, ValueError):
    """Base class for ingestion errors."""


class MalformedLine(DatasetError):
    def __init__(self, line_no, detail=""):
        super().__init__(f"malformed LIBSVM line {line_no}: {detail}".rstrip(": "))
        self.line_no = line_no


class IndexOutOfRange(DatasetError):
    def __init__(self, line_no, idx):
        super().__init__(f"feature index {idx} out of range on line {line_no}")
        self.line_no = line_no
        self.idx = idx


class MalformedRow(DatasetError):
    def __init__(self, line_no, detail=""):
        super().__init__(f"malformed CSV row {line_no}: {detail}".rstrip(": "))
        self.line_no = line_no


class MissingColumn(DatasetError):
    def __init__(self, name):
        super().__init__(f"column {name!r} not found in header")
        self.name = name
