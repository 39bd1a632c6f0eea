"""Executable Para(Vect): parametric linear maps, linear attention, truncated
free monads, positional encodings, equivariance and circuit path expansion,
each with law checks."""

__version__ = "0.1.0"
