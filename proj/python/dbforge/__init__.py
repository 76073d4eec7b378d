"""Annotation-free debiasing laboratory on synthetic biased datasets.

Thin wrapper around the compiled `_dbforge` extension: confusion-mode
statistics, closed-form mode reweighting, multi-stage bias exploration
(MST), debiased training and the experiment pipeline.
"""

from ._dbforge import *  # noqa: F401,F403
