"""TD agents with similarity-based critic-difference propagation, in-repo
environments, and a seeded experiment harness."""

__version__ = "0.1.0"
