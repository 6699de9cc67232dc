"""Test suite for the pipadmm package."""
