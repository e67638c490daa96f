"""semiqa - Retrieval-augmented question answering over statutes and financial reports."""

__version__ = "0.1.0"
