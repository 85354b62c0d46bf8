"""Deterministic simulator for hybrid public verifiability of postal voting.

A private environment of permissioned ledgers run by electoral authorities
(citizen identity, electoral registers, result publication) bridged to a
public environment that anyone can verify.
"""

__version__ = "0.1.0"
