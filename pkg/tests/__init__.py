"""
urnlab test suite
Unit, property and Monte Carlo tests for the urn engine, statistics and verification
"""
