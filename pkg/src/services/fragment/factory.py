from typing import Optional

from src.config import FragmentSettings, get_settings

from .patterns import load_cleavage_table, load_patterns
from .recipe import Fragmenter


def make_fragmenter(settings: Optional[FragmentSettings] = None, recipe: Optional[str] = None) -> Fragmenter:
    """
    Create a fragmenter from fragment settings.

    Args:
        settings: Fragment section (defaults to the global settings)
        recipe: Recipe overriding the configured one

    Returns:
        Fragmenter: Recipe evaluator with its pattern library and cleavage table loaded
    """
    settings = settings or get_settings().fragment
    patterns = load_patterns(settings.pattern_file, settings.max_pattern_atoms)
    table = load_cleavage_table(settings.cleavage_file, settings.max_pattern_atoms)
    return Fragmenter(recipe or settings.recipe, patterns, table, settings.max_pattern_atoms)

