"""Scenario layer: topology, citizens, the election process, threats and the runner."""
