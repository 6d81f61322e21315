"""Path functionals of the cascade and the random-walk oracle."""

__all__ = ["geometry", "measure", "walk_oracle"]
