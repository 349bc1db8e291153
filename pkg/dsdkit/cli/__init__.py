"""Command-line interface"""
from dsdkit.cli.main import build_parser, execute, main

__all__ = ["build_parser", "execute", "main"]
