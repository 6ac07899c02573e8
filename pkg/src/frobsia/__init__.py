"""Workbench for product structures and abundant superintegrable systems on flat R^n."""
from .abundant import AbundantStructure, verify_abundant
from .catalog import get_entry, list_entries, smorodinski_winternitz
from .correspondence import abundant_to_product, product_to_abundant, roundtrip_check
from .errors import (DomainError, ExprSyntaxError, FrobsiaError, IntegrabilityError, PoleError,
                     PreconditionError, RankDeficiencyError, SchemaError)
from .exprfield import ScalarFieldExpr, parse
from .product import ProductStructure, verify_product
from .prolongation import integrate_basis
from .hamiltonics import superintegrability_certificate

__version__ = "0.1.0"

__all__ = [
    "AbundantStructure", "DomainError", "ExprSyntaxError", "FrobsiaError", "IntegrabilityError",
    "PoleError", "PreconditionError", "ProductStructure", "RankDeficiencyError",
    "ScalarFieldExpr", "SchemaError", "abundant_to_product", "get_entry", "integrate_basis",
    "list_entries", "parse", "product_to_abundant", "roundtrip_check", "smorodinski_winternitz",
    "superintegrability_certificate", "verify_abundant", "verify_product",
]
