"""Numerical laboratory for moment-map geometry of almost complex structures on tori and the sphere."""

from .backends import Sphere, Torus, make_backend
from .fields import (
    ACStruct,
    EndoField,
    FormField,
    Perturbation,
    ScalarField,
    TangentValuedForm,
    VectorField,
)

__version__ = "0.1.0"

__all__ = [
    "ACStruct",
    "EndoField",
    "FormField",
    "Perturbation",
    "ScalarField",
    "Sphere",
    "TangentValuedForm",
    "Torus",
    "VectorField",
    "make_backend",
]
