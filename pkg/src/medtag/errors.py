"""Exception hierarchy shared by every medtag module."""


class MedtagError(Exception):
    """Base class for all errors raised by this package."""


class LineError(MedtagError):
    """An error that may be tied to a line of an input file."""

    def __init__(self, message="", line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# schemas
class SchemaError(MedtagError, ValueError):
    pass


class DuplicateLabel(SchemaError):
    pass


class EmptyLabelSet(SchemaError):
    pass


class IllegalLabelCharacter(SchemaError):
    pass


# annotations
class AnnotationError(LineError, ValueError):
    pass


class LabelNotInSchema(AnnotationError):
    pass


class UnknownTag(AnnotationError):
    pass


class UnbalancedTag(AnnotationError):
    pass


class NestedTag(AnnotationError):
    pass


class EmptySpan(AnnotationError):
    pass


class WordMismatch(AnnotationError):
    pass


class LengthMismatch(AnnotationError):
    pass


class DanglingInside(AnnotationError):
    pass


class UnknownLabel(AnnotationError):
    pass


# automaton / decoding
class AutomatonError(MedtagError):
    pass


class FinishedState(AutomatonError):
    pass


class IllegalAction(AutomatonError, ValueError):
    pass


class TooManyPaths(AutomatonError):
    pass


# scorers
class ScorerFailure(MedtagError):
    pass


class ScorerTimeout(ScorerFailure):
    pass


class MalformedResponse(ScorerFailure):
    pass


class HTTPStatusError(ScorerFailure):
    def __init__(self, status, message=""):
        self.status = status
        super().__init__(f"HTTP {status} {message}".strip())


class EmptyCorpus(MedtagError, ValueError):
    pass


# metrics
class MetricError(MedtagError, ValueError):
    pass


class DegenerateAgreement(MetricError):
    pass


class ConstantVector(MetricError):
    pass


class InvalidPermutation(MetricError):
    pass


# pretraining data
class PipelineError(MedtagError, ValueError):
    pass


class DegenerateInput(PipelineError):
    pass


class SentinelMismatch(PipelineError):
    pass


class EmptyShard(PipelineError):
    pass


class IndivisibleBudget(PipelineError):
    pass


# task files
class TaskIOError(LineError, ValueError):
    pass


class ParseError(TaskIOError):
    pass


class MalformedJson(TaskIOError):
    pass


class MissingField(TaskIOError):
    pass
