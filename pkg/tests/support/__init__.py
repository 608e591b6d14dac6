"""Shared support helpers for test readability."""
