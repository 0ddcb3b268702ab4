import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

from pydantic import ValidationError
from src.config import DATA_DIR
from src.exceptions import PatternError
from src.schemas.fragment.models import CleavageRule, CleavageTable, Pattern, PatternAtom, PatternBond
from src.schemas.molgraph.elements import ATOMIC_NUMBERS
from src.schemas.molgraph.models import BondType

logger = logging.getLogger(__name__)

DEFAULT_PATTERN_FILE = DATA_DIR / "fg_patterns.txt"
DEFAULT_CLEAVAGE_FILE = DATA_DIR / "cleavage_table.txt"
MAX_PATTERN_ATOMS = 16

PATTERN_ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
PATTERN_AROMATIC = ("b", "c", "n", "o", "p", "s")
# ``~`` is the any-bond wildcard
PATTERN_BONDS = {"-": BondType.SINGLE, "=": BondType.DOUBLE, "#": BondType.TRIPLE, ":": BondType.AROMATIC, "~": None}


def _bracket_atom(body: str, name: str) -> PatternAtom:
    symbols = [symbol.strip() for symbol in body.split(",")]
    if not symbols or any(not symbol for symbol in symbols):
        raise PatternError(f"pattern {name!r}: empty element list [{body}]")
    elements = set()
    flags = set()
    for symbol in symbols:
        atomic_number = ATOMIC_NUMBERS.get(symbol.capitalize())
        if atomic_number is None:
            raise PatternError(f"pattern {name!r}: unknown element {symbol!r}")
        elements.add(atomic_number)
        flags.add(symbol.islower())
    aromatic = flags.pop() if len(flags) == 1 else None
    return PatternAtom(elements=frozenset(elements), aromatic=aromatic)


def parse_pattern(name: str, text: str, max_atoms: int = MAX_PATTERN_ATOMS) -> Pattern:
    """
    Parse one pattern in the simplified substructure grammar.

    Atoms are organic-subset symbols (uppercase aliphatic, lowercase aromatic), ``*`` for any atom,
    or bracketed element lists such as ``[F,Cl,Br,I]``. Bonds are ``- = # :`` or ``~`` for any bond;
    an implicit bond is aromatic between two aromatic atoms and single otherwise. Branches use
    parentheses; ring closures are not part of the grammar.

    Args:
        name: Pattern name
        text: Pattern text
        max_atoms: Atom-count guard

    Returns:
        Pattern
    """
    atoms: List[PatternAtom] = []
    bonds: List[Tuple[int, int, Optional[BondType], bool]] = []
    prev: Optional[int] = None
    pending: Optional[str] = None
    branches: List[int] = []
    pos = 0
    text = text.strip()
    if not text:
        raise PatternError(f"pattern {name!r} is empty")

    while pos < len(text):
        char = text[pos]
        atom: Optional[PatternAtom] = None
        if char == "*":
            atom = PatternAtom()
            pos += 1
        elif char == "[":
            end = text.find("]", pos)
            if end < 0:
                raise PatternError(f"pattern {name!r}: unterminated bracket at {pos}")
            atom = _bracket_atom(text[pos + 1 : end], name)
            pos = end + 1
        elif char.isalpha():
            symbol = next((s for s in PATTERN_ORGANIC if text.startswith(s, pos)), None)
            if symbol is not None:
                atom = PatternAtom(elements=frozenset({ATOMIC_NUMBERS[symbol]}), aromatic=False)
                pos += len(symbol)
            elif char in PATTERN_AROMATIC:
                atom = PatternAtom(elements=frozenset({ATOMIC_NUMBERS[char.upper()]}), aromatic=True)
                pos += 1
            else:
                raise PatternError(f"pattern {name!r}: unknown atom symbol {char!r} at {pos}")
        elif char in PATTERN_BONDS:
            if pending is not None or prev is None:
                raise PatternError(f"pattern {name!r}: dangling bond {char!r} at {pos}")
            pending = char
            pos += 1
            continue
        elif char == "(":
            if prev is None or pending is not None:
                raise PatternError(f"pattern {name!r}: misplaced '(' at {pos}")
            branches.append(prev)
            pos += 1
            continue
        elif char == ")":
            if not branches or pending is not None:
                raise PatternError(f"pattern {name!r}: unbalanced ')' at {pos}")
            prev = branches.pop()
            pos += 1
            continue
        elif char.isdigit() or char == "%":
            raise PatternError(f"pattern {name!r}: ring closures are not supported")
        else:
            raise PatternError(f"pattern {name!r}: unexpected character {char!r} at {pos}")

        index = len(atoms)
        atoms.append(atom)
        if prev is not None:
            bonds.append((prev, index, PATTERN_BONDS[pending] if pending else None, pending is not None))
        pending = None
        prev = index

    if pending is not None:
        raise PatternError(f"pattern {name!r}: dangling bond {pending!r}")
    if branches:
        raise PatternError(f"pattern {name!r}: unbalanced '('")
    if len(atoms) > max_atoms:
        raise PatternError(f"pattern {name!r} has {len(atoms)} atoms, more than the limit of {max_atoms}")

    resolved = []
    for a, b, bond_type, explicit in bonds:
        if not explicit:
            bond_type = BondType.AROMATIC if atoms[a].aromatic is True and atoms[b].aromatic is True else BondType.SINGLE
        resolved.append(PatternBond(a=a, b=b, bond_type=bond_type))

    try:
        return Pattern(name=name, atoms=tuple(atoms), bonds=tuple(resolved), source=text)
    except ValidationError as e:
        raise PatternError(f"invalid pattern {name!r}: {e}") from e


def _content_lines(path: Path) -> List[Tuple[int, str]]:
    if not path.exists():
        raise PatternError(f"Pattern file not found: {path}")
    lines = []
    for number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append((number, line))
    return lines


def load_patterns(path: Union[str, Path, None] = None, max_atoms: int = MAX_PATTERN_ATOMS) -> List[Pattern]:
    """Read a ``name := pattern`` file (bundled functional-group library when no path is given)."""
    path = Path(path) if path else DEFAULT_PATTERN_FILE
    patterns = []
    for number, line in _content_lines(path):
        if ":=" not in line:
            raise PatternError(f"{path} line {number}: expected 'name := pattern'")
        name, text = (part.strip() for part in line.split(":=", 1))
        if not name:
            raise PatternError(f"{path} line {number}: pattern name is empty")
        patterns.append(parse_pattern(name, text, max_atoms))
    logger.debug(f"Loaded {len(patterns)} patterns from {path}")
    return patterns


def load_cleavage_table(path: Union[str, Path, None] = None, max_atoms: int = MAX_PATTERN_ATOMS) -> CleavageTable:
    """Read a ``left | right`` environment-pair file (bundled table when no path is given)."""
    path = Path(path) if path else DEFAULT_CLEAVAGE_FILE
    rules = []
    for number, line in _content_lines(path):
        sides = [side.strip() for side in line.split("|")]
        if len(sides) != 2 or not all(sides):
            raise PatternError(f"{path} line {number}: expected 'left_pattern | right_pattern'")
        left = parse_pattern(f"rule{len(rules)}.left", sides[0], max_atoms)
        right = parse_pattern(f"rule{len(rules)}.right", sides[1], max_atoms)
        rules.append(CleavageRule(left=left, right=right))
    if not rules:
        raise PatternError(f"{path} holds no cleavage rules")
    return CleavageTable(rules=tuple(rules))
