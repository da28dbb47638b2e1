"""Decentralized mirror-descent optimization over Bregman kernels."""

from . import (  # noqa: F401
    algorithms,
    diagnostics,
    domains,
    hruc,
    kernels,
    modulus,
    network,
    problems,
)

__version__ = "0.1.0"
