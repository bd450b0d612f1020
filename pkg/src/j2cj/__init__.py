"""Java-to-Cangjie translation toolkit.

Non-training machinery of a multi-stage code-translation pipeline for a
low-resource target language: training-corpus construction, structural AST
summaries, compile/test-driven iterative repair with retrieval-augmented
guidance, and functional-correctness evaluation.
"""

__version__ = "0.1.0"
