"""Explicit-state model checking of OSPF flooding and adjacency building under attack."""

__version__ = "0.1.0"
