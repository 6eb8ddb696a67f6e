"""
Simulation Parameters
Numerical tolerances, size caps and execution settings shared by every module
Defaults can be overridden from a JSON file and from LINDBLAD_* environment variables
"""

import os
import json
import logging
from datetime import datetime

logger = logging.getLogger(__name__)


class SimulationParameters:
    """Manages tolerances and execution settings for the simulator"""

    def __init__(self, params_file=None):
        self.params_file = params_file or os.getenv('LINDBLAD_PARAMS_FILE', 'simulation_params.json')

        self.defaults = {
            # Size caps (superoperators are 4^n x 4^n, statevectors 2^n)
            'superop_qubit_cap': 6,
            'statevector_qubit_cap': 12,

            # State and matrix predicates
            'hermitian_tol': 1e-10,
            'unitary_tol': 1e-10,
            'psd_tol': 1e-10,
            'trace_tol': 1e-10,

            # Channel checks
            'cptp_tol': 1e-9,
            'choi_hermitian_tol': 1e-9,

            # Dissipator truncation
            'taylor_max_order': 40,
            'taylor_error_floor': 1e-15,

            # Time-dependent surrogates and oracles
            'sup_grid_points': 1000,
            'ode_default_steps': 200,

            # Trajectory execution
            'trajectory_batch_size': 256,
            'n_jobs': 1,
        }

        self.params = self.defaults.copy()

        self.load_params()
        self._apply_env_overrides()

    def load_params(self):
        """Load parameter overrides from disk"""
        try:
            if os.path.exists(self.params_file):
                with open(self.params_file, 'r') as f:
                    data = json.load(f)
                    overrides = {k: v for k, v in data.get('params', {}).items() if k in self.defaults}
                    self.params.update(overrides)
                    logger.info(f"Loaded {len(overrides)} parameter overrides from {self.params_file}")
        except Exception as e:
            logger.warning(f"Could not load simulation parameters: {e}")

    def save_params(self):
        """Save current parameters to disk"""
        try:
            with open(self.params_file, 'w') as f:
                json.dump({
                    'params': self.params,
                    'last_updated': datetime.now().isoformat()
                }, f, indent=2)
        except Exception as e:
            logger.error(f"Could not save simulation parameters: {e}")

    def _apply_env_overrides(self):
        """LINDBLAD_<KEY> environment variables win over file values"""
        for name, default in self.defaults.items():
            raw = os.getenv(f"LINDBLAD_{name.upper()}")
            if raw is None:
                continue
            try:
                self.params[name] = type(default)(raw)
            except ValueError:
                logger.warning(f"Ignoring LINDBLAD_{name.upper()}={raw!r}: expected {type(default).__name__}")

    def get(self, param_name, default=None):
        """Get parameter value (override or default)"""
        if default is None:
            default = self.defaults.get(param_name)
        return self.params.get(param_name, default)

    def set(self, param_name, value):
        """Override a parameter for the current process"""
        if param_name not in self.defaults:
            raise ValueError(f"Unknown simulation parameter: {param_name}")
        self.params[param_name] = type(self.defaults[param_name])(value)

    def get_all(self):
        """Get all current parameters"""
        return self.params.copy()

    def reset_to_defaults(self):
        """Reset all parameters to defaults"""
        self.params = self.defaults.copy()
        logger.info("Simulation parameters reset to defaults")


# Singleton instance
_params_instance = None


def get_simulation_params():
    """Get singleton instance of simulation parameters"""
    global _params_instance
    if _params_instance is None:
        _params_instance = SimulationParameters()
    return _params_instance
