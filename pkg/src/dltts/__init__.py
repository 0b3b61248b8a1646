"""Privacy-violation analysis of query sequences over anonymized databases."""
from .model import (
    AttributeGroup,
    Database,
    Header,
    HeaderClass,
    IntInterval,
    NominalSet,
    Number,
    PolicyAtom,
    Record,
    Schema,
    TaxNode,
    Wildcard,
)
from .taxonomy import Taxonomy

__all__ = [
    "AttributeGroup", "Database", "Header", "HeaderClass", "IntInterval", "NominalSet",
    "Number", "PolicyAtom", "Record", "Schema", "TaxNode", "Taxonomy", "Wildcard",
]
