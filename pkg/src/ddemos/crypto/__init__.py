"""Cryptographic building blocks: groups, commitments, sharing, proofs, signatures."""
