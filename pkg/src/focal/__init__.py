"""focal: permutation-graph analysis of sequent calculi and generation of
focused proof systems, with bounded proof search for cross-validation."""

__version__ = "0.1.0"
