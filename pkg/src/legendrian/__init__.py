"""Minimal Legendrian surfaces in S^5 built by gluing: numerics and verification."""
