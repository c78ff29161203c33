"""Naming conventions tying derived atoms back to their field."""

MOMENTUM_PREFIX = "Pi_"
MULTIPLIER_PREFIX = "u_"
EXTRA_MULTIPLIER_PREFIX = "ub_"
CONSTRAINT_PREFIXES = ("phi_", "chi_")
FDERIV_PREFIX = "fd_"


def momentum_name(field: str) -> str:
    return MOMENTUM_PREFIX + field


def primary_label(field: str) -> str:
    return "phi_" + field


def secondary_label(n: int) -> str:
    return f"chi_{n}"


def multiplier_name(label: str) -> str:
    return MULTIPLIER_PREFIX + label


def extra_multiplier_name(label: str) -> str:
    return EXTRA_MULTIPLIER_PREFIX + label


def fderiv_name(field: str) -> str:
    return FDERIV_PREFIX + field


def field_of(name: str) -> str:
    for p in (MOMENTUM_PREFIX, FDERIV_PREFIX):
        if name.startswith(p):
            return name[len(p):]
    return name
