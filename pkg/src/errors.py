"""Exception hierarchy shared by every layer of the agent."""


class UrbanAgentError(Exception):
    """Base class for all agent errors."""


# ---------------------------------------------------------------- data faults
class DataError(UrbanAgentError):
    """A data asset or toolkit operation failed."""


class SchemaTooLarge(DataError):
    pass


class InvalidExtent(DataError):
    pass


class UnknownGuid(DataError):
    pass


class CycleDetected(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int = None):
        self.line = line
        super().__init__(message if line is None else f"{message} (line {line})")


class RaggedRow(ParseError):
    pass


class UnknownColumn(DataError):
    pass


class TypeMismatch(DataError):
    pass


class UnsupportedShapeType(DataError):
    pass


class MalformedHeader(DataError):
    pass


class AttributeCountMismatch(DataError):
    pass


class DegenerateRing(DataError):
    pass


class CrsMismatch(DataError):
    pass


class MissingCoordinateColumns(DataError):
    pass


class AlignmentDisabled(DataError):
    pass


class CellCountMismatch(DataError):
    pass


class UnknownClassCode(DataError):
    pass


class NoOverlap(DataError):
    pass


class AllNoData(DataError):
    pass


class LegendMismatch(DataError):
    pass


class InvalidParameter(DataError):
    pass


class InvalidThresholds(DataError):
    pass


class ZeroVariance(DataError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Column '{column}' has zero variance")


class TooFewObservations(DataError):
    pass


class EmptyViewport(DataError):
    pass


class MissingLabelColumn(DataError):
    pass


class AllNull(DataError):
    pass


class EmptyPoints(DataError):
    pass


# ----------------------------------------------------------- controller faults
class ControllerError(UrbanAgentError):
    pass


class EmptyQuery(ControllerError):
    pass


class NoMatchingAssets(ControllerError):
    pass


class EmptyResults(ControllerError):
    pass


class DanglingArtifact(ControllerError):
    pass


# ---------------------------------------------------------------- agent faults
class AgentError(UrbanAgentError):
    pass


class BudgetExceeded(AgentError):
    def __init__(self, slot: str, size: int, budget: int):
        self.slot = slot
        self.size = size
        self.budget = budget
        super().__init__(f"Prompt of {size} chars exceeds budget {budget}; largest slot: {slot}")


class UnparseableCompletion(AgentError):
    pass


class ProviderError(AgentError):
    def __init__(self, category: str, message: str, status: int = None):
        self.category = category
        self.status = status
        super().__init__(f"[{category}] {message}")


class ScriptExhausted(AgentError):
    pass


class RoundLimitExceeded(AgentError):
    pass


class UnknownTool(AgentError):
    pass


# -------------------------------------------------------------- harness faults
class HarnessError(UrbanAgentError):
    pass


class MissingOracle(HarnessError):
    pass


class MissingTranscript(HarnessError):
    pass


class FixtureIoError(HarnessError):
    pass
