"""
Tests for the switched Takagi-Sugeno LMI synthesis toolkit.

Fast tests run by default; the bundled-example run is marked `slow`.
"""
