"""Tracking metrics and A/B comparison tables."""
