"""Tests package for the survival transport toolkit."""
