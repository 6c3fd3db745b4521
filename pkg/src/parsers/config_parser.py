"""
Config Parser Module

Reads experiment configuration files (JSON or YAML) and command-line
key=value overrides into nested dictionaries.
"""

import json
import os
from typing import Any, Dict, Iterable, Optional

import structlog
import yaml

YAML_SUFFIXES = (".yaml", ".yml")


class ConfigParser:
    """
    Parses configuration documents into plain nested dictionaries.
    """

    def __init__(self):
        self.logger = structlog.get_logger(__name__)

    def parse_file(self, path: Optional[str]) -> Dict[str, Any]:
        """
        Parse a JSON or YAML configuration file.

        Args:
            path: File path; None yields an empty document

        Returns:
            dict: The parsed document

        Raises:
            ConfigParsingError: If the file is missing, unreadable or not a mapping
        """
        if path is None:
            return {}
        if not os.path.isfile(path):
            raise ConfigParsingError(f"Configuration file not found: {path}")
        try:
            with open(path, "r") as f:
                if path.lower().endswith(YAML_SUFFIXES):
                    document = yaml.safe_load(f)
                else:
                    document = json.load(f)
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigParsingError(f"Failed to parse {path}: {e}") from e

        if document is None:
            document = {}
        if not isinstance(document, dict):
            raise ConfigParsingError(f"Top level of {path} must be a mapping, got {type(document).__name__}")
        self.logger.debug("configuration parsed", path=path, keys=len(document))
        return document

    def parse_overrides(self, assignments: Optional[Iterable[str]]) -> Dict[str, Any]:
        """
        Turn dotted assignments into a nested dictionary.

        "msa.trials=50" becomes {"msa": {"trials": 50}}; values are read as YAML scalars
        or flow collections, so "wegner.half_sides_grid_units=[8,16]" yields a list.

        Raises:
            ConfigParsingError: If an assignment has no '=' or an empty key
        """
        result: Dict[str, Any] = {}
        for assignment in assignments or []:
            key, sep, raw = assignment.partition("=")
            key = key.strip()
            if not sep or not key or any(not part for part in key.split(".")):
                raise ConfigParsingError(f"Override must look like section.key=value, got {assignment!r}")
            try:
                value = yaml.safe_load(raw) if raw.strip() else None
            except yaml.YAMLError as e:
                raise ConfigParsingError(f"Cannot read value of override {assignment!r}: {e}") from e
            node = result
            parts = key.split(".")
            for part in parts[:-1]:
                child = node.setdefault(part, {})
                if not isinstance(child, dict):
                    raise ConfigParsingError(f"Override {assignment!r} conflicts with an earlier scalar override")
                node = child
            node[parts[-1]] = value
        return result


class ConfigParsingError(ValueError):
    """Exception raised when a configuration document cannot be parsed."""
    pass
