"""Test suite for the cdp package."""
