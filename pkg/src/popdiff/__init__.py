"""Popular differences for matrix patterns over (F_p^n)^k, at desk scale."""

__version__ = "0.1.0"

DEFAULT_GUARD = 10**8
