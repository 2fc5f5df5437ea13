"""Tests for the support orchestrator demo."""
