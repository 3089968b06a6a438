"""Exception types shared across the toolkit."""


class AdreskitError(Exception):
    """Base class for all toolkit errors."""


class EmptySample(AdreskitError):
    """A token sequence that must be non-empty was empty."""


class UnknownTag(AdreskitError):
    """A tag identifier is not part of the schema inventory."""


class ParseError(AdreskitError):
    """Malformed CoNLL input line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaError(AdreskitError):
    """A sample violates the IOB tagging scheme."""

    def __init__(self, sample_index: int, message: str):
        super().__init__(f"sample {sample_index}: {message}")
        self.sample_index = sample_index


class TooSmall(AdreskitError):
    """Dataset too small to split."""


class InvalidSize(AdreskitError):
    """Requested dataset size is not positive."""


class EmptyTrain(AdreskitError):
    """Vocabulary construction needs a non-empty training split."""


class TooLong(AdreskitError):
    """A sample exceeds the maximum sequence length."""


class ConfigError(AdreskitError):
    """Invalid model or training configuration."""


class ShapeError(AdreskitError):
    """Tensor shapes do not line up."""


class EmptyLoss(AdreskitError):
    """Loss requested over a batch with no unmasked positions."""


class NonFiniteGradient(AdreskitError):
    """A gradient came back NaN or infinite; the training run is aborted."""


class StudyFailed(AdreskitError):
    """No completed trial is available to select a best configuration from."""


class AlignmentError(AdreskitError):
    """Gold and predicted tag sequences do not align."""


class EmptyEval(AdreskitError):
    """Evaluation requested over zero samples or zero tokens."""


class PairingError(AdreskitError):
    """Head-comparison plot needs both head kinds for at least one variant."""


class EmptyInput(AdreskitError):
    """Plot input is empty."""


class DegenerateInput(AdreskitError):
    """Projection input carries no variance (all rows identical)."""
