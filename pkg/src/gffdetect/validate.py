"""
Functions that support validation of plain trees against the packaged
YAML schemas
"""

import functools
from importlib import resources

import yaml
import asdf
from asdf import schema as asdf_schema
from asdf.exceptions import ValidationError


__all__ = ["ValidationError", "load_schema", "validate_tree", "error_field", "error_message"]


@functools.lru_cache(maxsize=None)
def load_schema(name):
    """
    Load one of the schemas shipped in ``gffdetect.schemas``.

    Parameters
    ----------
    name : str
        Schema name without the ``.schema.yaml`` suffix,
        e.g. ``"observation"``.

    Returns
    -------
    dict
    """
    text = resources.files("gffdetect.schemas").joinpath(f"{name}.schema.yaml").read_text()
    return yaml.safe_load(text)


@functools.lru_cache(maxsize=None)
def _context():
    # one throwaway AsdfFile serves as validation context for every call
    return asdf.AsdfFile()


def validate_tree(tree, schema_name):
    """
    Validate a tree of plain Python values against a packaged schema.

    Raises
    ------
    asdf.exceptions.ValidationError
        When the tree does not conform.
    """
    asdf_schema.validate(tree, ctx=_context(), schema=load_schema(schema_name))


def error_field(error):
    """
    Name of the offending field of a validation error.

    For missing or unexpected properties the property itself is named,
    otherwise the dotted path to the failing node.
    """
    if error.validator in ("required", "additionalProperties"):
        parts = str(error.message).split("'")
        if len(parts) >= 3:
            name = parts[1]
            return ".".join([str(p) for p in error.path] + [name])
    if len(error.path):
        return ".".join(str(p) for p in error.path)
    return "<root>"


def error_message(path, error):
    """
    Add the path to the attribute as context for a validation error
    """
    if isinstance(path, list):
        spath = [str(p) for p in path]
        name = '.'.join(spath)
    else:
        name = str(path)

    error = str(getattr(error, "message", error))
    if len(error) > 2000:
        error = error[0:1996] + " ..."
    errfmt = "While validating {} the following error occurred:\n{}"
    errmsg = errfmt.format(name, error)
    return errmsg
