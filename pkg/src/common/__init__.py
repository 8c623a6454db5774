"""Shared helpers: exception hierarchy, chunked thread pool, logging setup."""
