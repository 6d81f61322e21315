"""Node-weight law, seeding and tree generation."""

__all__ = ["weights", "seeding", "cascade"]
