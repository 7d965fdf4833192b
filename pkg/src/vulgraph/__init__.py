"""vulgraph: graph-based vulnerability detection with statement-level
interpretations.

Pipeline: mini-C methods are parsed into program dependence graphs, each
statement is encoded from five feature views (sub-tokens, AST, variables and
types, data-dependence context, control-dependence context) fused under
attention, a feature-attention graph convolutional network scores the method,
and positive decisions are explained by optimizing an edge mask whose top-K
subgraph preserves the decision. Frequent abstracted subgraphs of those
interpretations become vulnerability patterns.
"""

__version__ = "0.1.0"
