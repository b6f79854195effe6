"""Exception hierarchy for the msplan toolkit."""


class MSPError(Exception):
    """Base class for every error raised by msplan."""


# --- formulas -------------------------------------------------------------

class FormulaError(MSPError, ValueError):
    """A chemical formula could not be parsed."""

    def __init__(self, formula, reason):
        self.formula = formula
        self.reason = reason
        super().__init__(f"{reason}: {formula!r}")


class EmptyFormula(FormulaError):
    def __init__(self, formula, reason="empty formula"):
        super().__init__(formula, reason)


class UnknownElement(FormulaError):
    def __init__(self, formula, symbol):
        self.symbol = symbol
        super().__init__(formula, f"unknown element or symbol {symbol!r}")


class UnbalancedBrackets(FormulaError):
    def __init__(self, formula, reason="unbalanced brackets"):
        super().__init__(formula, reason)


class VariableSubscript(FormulaError):
    """Raised for compositional systems such as ``LixMn2O4``."""

    def __init__(self, formula, variable):
        self.variable = variable
        super().__init__(formula, f"variable subscript {variable!r}")


class MalformedNumber(FormulaError):
    def __init__(self, formula, text):
        self.text = text
        super().__init__(formula, f"malformed number {text!r}")


class EmptyComposition(MSPError, ValueError):
    pass


# --- taxonomy -------------------------------------------------------------

class TaxonomyError(MSPError, ValueError):
    """Invalid taxonomy definition file."""


class EmptySet(MSPError, ValueError):
    pass


class PrecursorParseError(MSPError, ValueError):
    """A member of a precursor set failed to parse."""

    def __init__(self, index, error):
        self.index = index
        self.error = error
        super().__init__(f"precursor #{index}: {error}")


# --- corpus ---------------------------------------------------------------

class SchemaViolation(MSPError, ValueError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnknownCategory(MSPError, ValueError):
    pass


class TooFewRecords(MSPError, ValueError):
    pass


class TooFewTargets(MSPError, ValueError):
    pass


# --- prompts / parsing ----------------------------------------------------

class EmptyPrecursorSet(MSPError, ValueError):
    pass


class EmptyOperations(MSPError, ValueError):
    pass


class MissingPrecursors(MSPError, ValueError):
    pass


class OutputParseError(MSPError, ValueError):
    """A model completion could not be decoded."""

    def __init__(self, message, diagnostics=()):
        self.diagnostics = list(diagnostics)
        super().__init__(message)


class NoPrecursorsFound(OutputParseError):
    pass


class NoOperationsFound(OutputParseError):
    pass


# --- retrieval / metrics --------------------------------------------------

class EmptyTrainingSet(MSPError, ValueError):
    pass


class KTooLarge(MSPError, ValueError):
    pass


class EmptyTruth(MSPError, ValueError):
    pass


class EmptyCandidates(MSPError, ValueError):
    pass


class EmptyCorpus(MSPError, ValueError):
    pass


# --- endpoint runner ------------------------------------------------------

class EndpointError(MSPError):
    """Base for chat-endpoint failures."""


class AuthError(EndpointError):
    pass


class RateLimited(EndpointError):
    """HTTP 429 persisted through every retry."""


class EndpointTimeout(EndpointError):
    pass


class ServerError(EndpointError):
    """5xx persisted through every retry, or an unexpected status code."""


class MalformedResponse(EndpointError):
    pass


class AllSamplesUnparseable(MSPError):
    def __init__(self, diagnostics, completions=()):
        self.diagnostics = list(diagnostics)
        self.completions = list(completions)
        super().__init__(f"none of {len(self.completions)} samples could be parsed")


class PPFailed(MSPError):
    """No parseable precursor candidate was produced in an MSP run."""

    def __init__(self, diagnostics=()):
        self.diagnostics = list(diagnostics)
        super().__init__("precursor prediction produced no usable candidate")
