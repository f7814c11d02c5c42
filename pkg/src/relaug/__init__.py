"""Retrieval-driven augmentation for relational databases.

Builds per-table lexical indices over walk-weighted tuple documents and
extracts two augmentation signals: same-table positive pairs for contrastive
training, and cross-table shortcut edges for graph densification.
"""

__version__ = "0.1.0"
