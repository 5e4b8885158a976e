"""Generation-probability metrics for evaluating generated text.

The engine scores a target text by its weighted conditional log-probability
under a pluggable sequence-to-sequence backend, in four directions
(faithfulness, precision, recall, F), optionally augmented with textual
prompts.  A meta-evaluation harness measures agreement between metric scores
and human judgments, runs paired bootstrap significance tests, and provides
fine-grained robustness analyses.
"""

__version__ = "0.1.0"
