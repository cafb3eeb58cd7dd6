"""Coverage path planning with a learned edge-probability graph network.

Pipeline: random obstacle grids -> 2-opt ground-truth tours -> supervised
edge classification -> greedy decoding with A* stitching -> millisecond
coverage trajectories benchmarked against the 2-opt baseline.
"""

__version__ = "0.1.0"
