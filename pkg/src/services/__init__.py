"""Service layer modules."""

__all__ = ["experiments", "identities", "trial_runner"]
