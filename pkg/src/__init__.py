"""Change-detection based controller switching for two-mode MDPs."""

__version__ = "0.1.0"
