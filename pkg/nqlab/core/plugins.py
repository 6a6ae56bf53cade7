"""
Resolution of "package.module:callable" plug-in references.
"""

import importlib
import logging
from typing import Callable

from nqlab.core.errors import ParameterOutOfRange

logger = logging.getLogger(__name__)


def is_plugin_reference(name: str) -> bool:
    return ":" in name


def load_callable(reference: str) -> Callable:
    """
    Import and return the callable named by reference.

    Raises:
        ParameterOutOfRange: if the module or attribute cannot be found
    """
    module_name, _, attribute = reference.partition(":")
    if not module_name or not attribute:
        raise ParameterOutOfRange(f"unknown function '{reference}'")
    try:
        module = importlib.import_module(module_name)
        target = getattr(module, attribute)
    except (ImportError, AttributeError) as e:
        logger.error(f"Could not resolve plug-in {reference}: {e}")
        raise ParameterOutOfRange(f"unknown function '{reference}'") from e
    if not callable(target):
        raise ParameterOutOfRange(f"'{reference}' is not callable")
    return target
