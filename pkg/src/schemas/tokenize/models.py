from functools import cached_property
from typing import Annotated, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from src.schemas.fragment.models import Fragment

UNK_KEY = "<UNK>"


class DiscreteToken(BaseModel):
    """A vocabulary id standing for a node, an edge or a fragment."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["discrete"] = "discrete"
    id: int = Field(..., ge=0, description="Vocabulary index")
    node: Optional[int] = Field(default=None, description="Node the token describes")
    edge: Optional[int] = Field(default=None, description="Edge the token describes")
    fragment: Optional[Fragment] = Field(default=None, description="Fragment the token describes")


class ContinuousToken(BaseModel):
    """A fixed-length real vector standing for a node."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["continuous"] = "continuous"
    vec: Tuple[float, ...] = Field(..., min_length=1)
    node: Optional[int] = None
    fragment: Optional[Fragment] = None

    @property
    def dim(self) -> int:
        return len(self.vec)


Token = Annotated[Union[DiscreteToken, ContinuousToken], Field(discriminator="kind")]


class AtomVocabulary(BaseModel):
    """Corpus atom types sorted by atomic number; UNK and the m0 mask row follow them in the embedding table."""

    model_config = ConfigDict(frozen=True)

    atomic_numbers: Tuple[int, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_sorted(self) -> "AtomVocabulary":
        if list(self.atomic_numbers) != sorted(set(self.atomic_numbers)):
            raise ValueError("atomic numbers must be distinct and ascending")
        return self

    @property
    def unk_id(self) -> int:
        return len(self.atomic_numbers)

    @property
    def mask_id(self) -> int:
        return len(self.atomic_numbers) + 1

    @property
    def num_classes(self) -> int:
        """Prediction classes: atom types plus UNK."""
        return len(self.atomic_numbers) + 1

    @property
    def num_rows(self) -> int:
        """Embedding rows: atom types, UNK and m0."""
        return len(self.atomic_numbers) + 2

    @cached_property
    def lookup(self) -> Dict[int, int]:
        return {z: k for k, z in enumerate(self.atomic_numbers)}

    def index(self, atomic_number: int) -> int:
        return self.lookup.get(atomic_number, self.unk_id)

    def indices(self, atomic_numbers: Sequence[int]) -> np.ndarray:
        return np.array([self.lookup.get(int(z), self.unk_id) for z in atomic_numbers], dtype=np.int64)


class MotifVocabulary(BaseModel):
    """Frequent canonical fragment keys, ordered by (count desc, key asc), with UNK at index K."""

    model_config = ConfigDict(frozen=True)

    keys: Tuple[str, ...] = Field(..., description="Canonical keys in index order")
    counts: Tuple[int, ...] = Field(..., description="Corpus count of each key")
    threshold: int = Field(..., ge=1)
    recipe_fingerprint: str
    recipe: str = Field(default="", description="Rendered recipe the vocabulary was built with")
    unk_count: int = Field(default=0, ge=0, description="Occurrences of keys below the threshold")

    @model_validator(mode="after")
    def _check_consistent(self) -> "MotifVocabulary":
        if len(self.keys) != len(self.counts):
            raise ValueError("keys and counts differ in length")
        if len(set(self.keys)) != len(self.keys):
            raise ValueError("duplicate vocabulary key")
        if any(count < self.threshold for count in self.counts):
            raise ValueError("a stored key is below the frequency threshold")
        return self

    @property
    def unk_id(self) -> int:
        return len(self.keys)

    @property
    def size(self) -> int:
        """Number of classes including UNK."""
        return len(self.keys) + 1

    @cached_property
    def lookup(self) -> Dict[str, int]:
        return {key: index for index, key in enumerate(self.keys)}

    def index(self, key: str) -> int:
        return self.lookup.get(key, self.unk_id)


class FrozenGinLayer(BaseModel):
    """Combine-MLP weights of one message-passing layer."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray


class FrozenGnnTokenizer(BaseModel):
    """A k-layer GIN with loaded weights, evaluated without a gradient tape."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    embedding: np.ndarray = Field(..., description="Embedding table indexed by the atom vocabulary")
    atom_vocab: AtomVocabulary
    layers: Tuple[FrozenGinLayer, ...] = Field(..., min_length=1)
    eps: float = 0.0

    @property
    def dim(self) -> int:
        return self.layers[-1].w2.shape[1]


class TokenSet(BaseModel):
    """Reconstruction targets of one batch: per-node or per-fragment, discrete ids or continuous vectors."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    level: Literal["node", "fragment"]
    ids: Optional[np.ndarray] = Field(default=None, description="Discrete targets")
    vectors: Optional[np.ndarray] = Field(default=None, description="Continuous targets, one row per token")
    num_classes: Optional[int] = Field(default=None, description="Class count for discrete targets")
    fragments: Tuple[Fragment, ...] = Field(default=(), description="Batch-level fragments for fragment targets")
    subtree_keys: Tuple[str, ...] = Field(default=(), description="One-hop subtree key per node, when known")

    @model_validator(mode="after")
    def _check_payload(self) -> "TokenSet":
        if (self.ids is None) == (self.vectors is None):
            raise ValueError("a token set holds either ids or vectors")
        if self.ids is not None and self.num_classes is None:
            raise ValueError("discrete targets need num_classes")
        if self.level == "fragment" and len(self.fragments) != len(self):
            raise ValueError("fragment targets need one fragment per token")
        return self

    @property
    def is_discrete(self) -> bool:
        return self.ids is not None

    @property
    def dim(self) -> int:
        return self.num_classes if self.is_discrete else self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids) if self.ids is not None else self.vectors.shape[0]

    def tokens(self) -> List[Token]:
        """Materialize individual tokens."""
        out: List[Token] = []
        for k in range(len(self)):
            node = k if self.level == "node" else None
            fragment = self.fragments[k] if self.level == "fragment" else None
            if self.is_discrete:
                out.append(DiscreteToken(id=int(self.ids[k]), node=node, fragment=fragment))
            else:
                out.append(ContinuousToken(vec=tuple(float(v) for v in self.vectors[k]), node=node, fragment=fragment))
        return out
