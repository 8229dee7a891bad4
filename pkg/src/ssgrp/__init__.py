"""Exact computational toolkit for groups acting on rooted trees and
for alternating full groups of Bratteli diagrams.

Subpackages:

- ``treecore``: spherically symmetric rooted trees, finite-depth tree
  automorphisms (portraits) with wreath-recursion arithmetic.
- ``selfsim``: self-similar group presentations, word expansion, nucleus
  computation and the contraction-accelerated word problem.
- ``permgrp``: finite permutation groups with deterministic stabilizer
  chains, rigid stabilizers and exact uniform sampling.
- ``coloring``: closed boundary sets, the red/green/blue vertex coloring,
  finite-index approximating subgroups and bad-blue-vertex experiments.
- ``bratteli``: Bratteli diagrams, exact path counting and the
  binomial-ratio / decay-bound formulas with brute-force oracles.
- ``cli``: batch experiment runner writing CSV/JSON reports and figures.
"""

__version__ = "0.1.0"
