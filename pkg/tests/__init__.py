"""
Tests for wavepinn
"""
