"""Test suite for ewris."""
