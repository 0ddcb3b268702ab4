class MgmLabException(Exception):
    """Base exception for every error raised by the lab."""


class ConfigurationError(MgmLabException):
    """Exception raised when configuration is invalid."""


# Molecular graph exceptions
class GraphException(MgmLabException):
    """Base exception for molecular-graph errors."""


class SmilesParseError(GraphException):
    """Exception raised when a SMILES string falls outside the supported subset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class GraphFileError(GraphException):
    """Exception raised when a corpus or structured graph file is malformed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class GraphValidationError(GraphException):
    """Exception raised when a graph violates its structural invariants."""


# Fragmentation exceptions
class FragmentationException(MgmLabException):
    """Base exception for fragmentation errors."""


class PatternError(FragmentationException):
    """Exception raised for malformed or oversized substructure patterns."""


class RecipeError(FragmentationException):
    """Exception raised when a fragmentation recipe is empty or malformed."""


# Tokenization exceptions
class TokenizationException(MgmLabException):
    """Base exception for tokenizer errors."""


class CanonicalizationError(TokenizationException):
    """Exception raised when a fragment is too large to canonicalize."""


class VocabularyError(TokenizationException):
    """Exception raised when a vocabulary cannot be built or read."""


class RecipeMismatchError(TokenizationException):
    """Exception raised when a vocabulary is used with a different recipe than it was built with."""


# Numerical exceptions
class NumericalException(MgmLabException):
    """Base exception for numerical failures."""


class ShapeError(NumericalException):
    """Exception raised when operand shapes are incompatible."""


class NonFiniteError(NumericalException):
    """Exception raised when an operation produces NaN or Inf."""


class TapeError(NumericalException):
    """Exception raised when the gradient tape is misused."""


class GradientCheckError(NumericalException):
    """Exception raised when analytic and numeric gradients disagree."""


# Model exceptions
class ModelException(MgmLabException):
    """Base exception for encoder/decoder stack errors."""


class StackConfigError(ModelException):
    """Exception raised when a stack preset does not fit the requested dimensions."""


class EmptyKeepSetError(ModelException):
    """Exception raised when every node of a graph is masked before the attention layers."""


class TrainingException(NumericalException):
    """Exception raised when a training step fails; carries epoch/batch context."""


class CheckpointError(MgmLabException):
    """Exception raised when a checkpoint cannot be written or read."""


class ProbeException(MgmLabException):
    """Exception raised when a linear probe cannot be run."""
