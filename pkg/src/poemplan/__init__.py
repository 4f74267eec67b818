"""Plan-then-write quatrain generation.

A query becomes one sub-topic keyword per line (graph ranking plus keyword
expansion), then an attention encoder-decoder writes the poem line by line,
each line conditioned on its keyword and everything written so far.
"""

__version__ = "0.1.0"
