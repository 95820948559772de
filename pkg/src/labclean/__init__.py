"""labclean: ingest, clean, and profile clinical lab test datasets."""

__version__ = "0.1.0"
