"""Desk-scale lab for budgeted seed search over a stochastic maze planner.

Subpackages cover the full pipeline: maze generation and BFS oracles
(maze), the stochastic denoising simulator (simgen), synthetic frame
rendering and pixel-level trajectory extraction (render), scoring and
failure taxonomy (verify), budgeted search (search), multi-round chaining
(chain), analysis metrics (metrics), and the experiment harness (bench).
"""

__version__ = "0.1.0"
