"""Tests for errors, config files and utilities."""
