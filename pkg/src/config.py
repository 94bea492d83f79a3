"""
Solver configuration.
Defaults live here; a JSON document (see metadata/default_config.json) can override them.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional


class SolverConfig:
    """
    Tunable limits for the solver, the weight machinery and the command-line runner.
    """

    def __init__(self, **overrides: Any):
        """
        Initialize the configuration with defaults, then apply overrides.

        Args:
            **overrides: Attribute values replacing the defaults
        """
        # Exact arithmetic
        self.factor_degree_bound = 12

        # Weights and value group
        self.rel_budget = 10 ** 6
        self.refinement_budget = 60
        self.rel_auto_max_q = 400

        # Homogeneous towers
        self.compress_retries = 8

        # Newton-Puiseux solver
        self.precision_slack_factor = 2
        self.max_hensel_iterations = 400
        self.max_precision_retries = 4
        self.max_zero_divisor_splits = 16

        # Liouville detector
        self.default_a_max = 10
        self.default_count_threshold = 3

        # Command-line runner
        self.batch_workers = 4
        self.default_precision = 6
        self.default_seed = 0

        for key, value in overrides.items():
            if not hasattr(self, key):
                raise ValueError(f"Unknown configuration key: {key}")
            setattr(self, key, value)

    @classmethod
    def load(cls, path: Optional[str]) -> "SolverConfig":
        """
        Load configuration from a JSON file.

        Args:
            path: Path to a JSON object of overrides (None for defaults)

        Returns:
            SolverConfig with the file's values applied
        """
        if path is None:
            return cls()
        config_path = Path(path)
        if not config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {path}")
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError(f"Configuration must be a JSON object: {path}")
        return cls(**data)

    def with_overrides(self, **overrides: Any) -> "SolverConfig":
        """Return a copy with some values replaced (None values are ignored)."""
        values = self.to_dict()
        values.update({key: value for key, value in overrides.items() if value is not None})
        return SolverConfig(**values)

    def to_dict(self) -> Dict[str, Any]:
        """Get the configuration as a plain dict."""
        return dict(sorted(vars(self).items()))


DEFAULT_CONFIG = SolverConfig()
