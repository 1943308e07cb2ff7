"""Tests for fracdiff-cldg."""
