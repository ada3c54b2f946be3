"""Last-iterate behaviour of mean-based no-regret learning in 2x2 competitive games."""

__version__ = "0.1.0"
