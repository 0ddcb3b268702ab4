from .brics import brics_cleave, cleavage_sites
from .cycles import cycle_rank, extract_cycles, merge_cycles
from .factory import make_fragmenter
from .matcher import anchored_match_exists, match_pattern, match_patterns
from .patterns import load_cleavage_table, load_patterns, parse_pattern
from .recipe import PRESETS, Fragmenter, compose, parse_recipe
from .refine import mgssl_refine, ring_members
from .remaining import is_cc_single, remaining_edges, remaining_nodes

__all__ = [
    "PRESETS",
    "Fragmenter",
    "anchored_match_exists",
    "brics_cleave",
    "cleavage_sites",
    "compose",
    "cycle_rank",
    "extract_cycles",
    "is_cc_single",
    "load_cleavage_table",
    "load_patterns",
    "make_fragmenter",
    "match_pattern",
    "match_patterns",
    "merge_cycles",
    "mgssl_refine",
    "parse_pattern",
    "parse_recipe",
    "remaining_edges",
    "remaining_nodes",
    "ring_members",
]
