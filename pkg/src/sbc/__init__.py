"""sbc: a compiler and analyzer for an extended-storyboard DSL.

Pipeline: parse (.sbd) -> validate -> information-flow analysis + security
rules -> scenario simulation (.scn) -> deterministic skeleton generation.
"""

__version__ = "0.1.0"
