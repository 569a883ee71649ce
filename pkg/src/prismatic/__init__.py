"""Interactive financial cluster analysis.

Quantitative side: yearly all-pairs stock correlations, threshold-pruned
correlation graphs, community extraction and betweenness ranking, and
all-subinterval correlation triangles for pairwise validation.

Qualitative side: a three-layer business-knowledge network (location,
human, business) with ego-centric queries, fused into knowledge-driven
clusters by graph-based multi-view clustering.
"""

__version__ = "0.1.0"
