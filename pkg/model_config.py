"""
Model Config
JSON model files: parsing with field-level diagnostics, lossless
re-serialization, and conversion into simulator objects
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from lindblad_model import HamiltonianSpec, JumpSpec, LindbladSpec, ResetTerm
from pauli_linalg import PauliString, StateVector, parse_phase, pauli_to_matrix
from stochastic_channel import depolarizing_jumps, dephasing_jumps, pauli_rate_jumps
from time_dependent import TimeDepDissipator, profile_from_dict

logger = logging.getLogger(__name__)

DISSIPATOR_TYPES = ('none', 'depolarizing', 'dephasing', 'pauli', 'reset', 'custom', 'timedep')


class ConfigParseError(ValueError):
    """Model config could not be parsed; field names the offending entry"""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# -------------------- Field helpers --------------------

def _require(data: dict, key: str, path: str):
    if not isinstance(data, dict):
        raise ConfigParseError(path, "expected an object")
    if key not in data:
        raise ConfigParseError(f"{path}.{key}" if path else key, "missing required field")
    return data[key]


def _number(value, path: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigParseError(path, f"expected a number, got {value!r}")
    value = float(value)
    if positive and not value > 0:
        raise ConfigParseError(path, f"must be positive, got {value}")
    if nonneg and value < 0:
        raise ConfigParseError(path, f"must be nonnegative, got {value}")
    return value


def _complex(value, path: str) -> complex:
    """A number or a [re, im] pair"""
    if isinstance(value, list) and len(value) == 2:
        return complex(_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))
    return complex(_number(value, path))


def _complex_to_json(z: complex):
    return z.real if z.imag == 0 else [z.real, z.imag]


def _pauli(value, n_qubits: int, path: str, phase='+1') -> PauliString:
    if not isinstance(value, str):
        raise ConfigParseError(path, f"expected a Pauli letter string, got {value!r}")
    try:
        p = PauliString.from_label(value, phase)
    except ValueError as e:
        raise ConfigParseError(path, str(e))
    if p.n_qubits != n_qubits:
        raise ConfigParseError(path, f"{value!r} has {p.n_qubits} letters, model has {n_qubits} qubits")
    return p


def _phase_label(entry: dict, path: str) -> str:
    label = entry.get('phase', '+1')
    try:
        parse_phase(label)
    except ValueError as e:
        raise ConfigParseError(f"{path}.phase", str(e))
    return str(label)


def _state(entry: dict, n_qubits: int, path: str) -> StateVector:
    if 'basis' in entry:
        label = entry['basis']
        if not isinstance(label, str) or len(label) != n_qubits:
            raise ConfigParseError(f"{path}.basis", f"expected a {n_qubits}-bit string, got {label!r}")
        try:
            return StateVector.basis(label)
        except ValueError as e:
            raise ConfigParseError(f"{path}.basis", str(e))
    if 'amplitudes' in entry:
        raw = entry['amplitudes']
        if not isinstance(raw, list) or len(raw) != 2 ** n_qubits:
            raise ConfigParseError(f"{path}.amplitudes", f"expected {2 ** n_qubits} amplitudes")
        amps = [_complex(a, f"{path}.amplitudes[{i}]") for i, a in enumerate(raw)]
        try:
            return StateVector(amps, normalize=True)
        except ValueError as e:
            raise ConfigParseError(f"{path}.amplitudes", str(e))
    raise ConfigParseError(path, "state needs 'basis' or 'amplitudes'")


def _ensemble(raw, n_qubits: int, path: str) -> Tuple[Tuple[float, StateVector], ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigParseError(path, "expected a nonempty list of weighted states")
    out = []
    for i, entry in enumerate(raw):
        p = f"{path}[{i}]"
        w = _number(_require(entry, 'weight', p), f"{p}.weight", nonneg=True)
        out.append((w, _state(entry, n_qubits, p)))
    total = sum(w for w, _ in out)
    if abs(total - 1.0) > 1e-12:
        raise ConfigParseError(path, f"weights sum to {total}, expected 1")
    return tuple(out)


# -------------------- Config --------------------

@dataclass(frozen=True)
class ModelConfig:
    """Parsed, validated model file; keeps the normalized JSON form for re-serialization"""
    n_qubits: int
    hamiltonian: Tuple[Dict[str, Any], ...] = ()
    dissipator: Dict[str, Any] = field(default_factory=lambda: {'type': 'none'})
    initial_state: Dict[str, Any] = field(default_factory=dict)
    observable: Tuple[Dict[str, Any], ...] = ()
    name: Optional[str] = None

    # ---- parsing ----

    @classmethod
    def from_dict(cls, data: dict) -> 'ModelConfig':
        if not isinstance(data, dict):
            raise ConfigParseError('<root>', "expected a JSON object")
        n = _require(data, 'n_qubits', '')
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ConfigParseError('n_qubits', f"expected a positive integer, got {n!r}")

        hamiltonian = []
        raw_h = data.get('hamiltonian', [])
        if not isinstance(raw_h, list):
            raise ConfigParseError('hamiltonian', "expected a list of terms")
        for i, entry in enumerate(raw_h):
            path = f"hamiltonian[{i}]"
            coeff = _number(_require(entry, 'coeff', path), f"{path}.coeff")
            phase = _phase_label(entry, path)
            if parse_phase(phase) not in (1, -1):
                raise ConfigParseError(f"{path}.phase", "Hamiltonian terms need a real phase")
            _pauli(_require(entry, 'pauli', path), n, f"{path}.pauli")
            hamiltonian.append({'coeff': coeff, 'pauli': entry['pauli'].upper(), 'phase': phase})

        dissipator = cls._parse_dissipator(data.get('dissipator', {'type': 'none'}), n)

        initial = data.get('initial_state', {'basis': '0' * n})
        if not isinstance(initial, dict):
            raise ConfigParseError('initial_state', "expected an object")
        if 'ensemble' in initial:
            _ensemble(initial['ensemble'], n, 'initial_state.ensemble')
        else:
            _state(initial, n, 'initial_state')

        observable = []
        raw_o = data.get('observable', [])
        if not isinstance(raw_o, list):
            raise ConfigParseError('observable', "expected a list of Pauli terms")
        for i, entry in enumerate(raw_o):
            path = f"observable[{i}]"
            coeff = _number(_require(entry, 'coeff', path), f"{path}.coeff")
            _pauli(_require(entry, 'pauli', path), n, f"{path}.pauli")
            observable.append({'coeff': coeff, 'pauli': entry['pauli'].upper()})

        cfg = cls(n, tuple(hamiltonian), dissipator, dict(initial), tuple(observable), data.get('name'))
        try:
            if cfg.is_time_dependent:
                cfg.timedep_dissipator()
                cfg.hamiltonian_spec()
            else:
                cfg.to_lindblad_spec()
        except ConfigParseError:
            raise
        except ValueError as e:
            raise ConfigParseError('<model>', str(e))
        return cfg

    @staticmethod
    def _parse_dissipator(raw, n: int) -> Dict[str, Any]:
        path = 'dissipator'
        kind = _require(raw, 'type', path)
        if kind not in DISSIPATOR_TYPES:
            raise ConfigParseError(f"{path}.type", f"unknown dissipator type {kind!r} (expected one of {DISSIPATOR_TYPES})")
        if kind == 'none':
            return {'type': 'none'}
        if kind == 'depolarizing':
            return {'type': kind, 'gamma': _number(_require(raw, 'gamma', path), f"{path}.gamma", nonneg=True)}
        if kind == 'dephasing':
            return {'type': kind, 'Gamma': _number(_require(raw, 'Gamma', path), f"{path}.Gamma", nonneg=True)}
        if kind == 'pauli':
            probs = _require(raw, 'probs', path)
            if not isinstance(probs, dict):
                raise ConfigParseError(f"{path}.probs", "expected a {pauli: rate} object")
            out = {}
            for label, rate in probs.items():
                _pauli(label, n, f"{path}.probs.{label}")
                out[label.upper()] = _number(rate, f"{path}.probs.{label}", nonneg=True)
            return {'type': kind, 'probs': out}
        if kind == 'reset':
            q = _number(_require(raw, 'q', path), f"{path}.q")
            if not 0 < q <= 1:
                raise ConfigParseError(f"{path}.q", f"unit-time survival probability must lie in (0, 1], got {q}")
            _ensemble(_require(raw, 'ensemble', path), n, f"{path}.ensemble")
            return {'type': kind, 'q': q, 'ensemble': raw['ensemble']}
        if kind == 'custom':
            jumps = _require(raw, 'jumps', path)
            if not isinstance(jumps, list) or not jumps:
                raise ConfigParseError(f"{path}.jumps", "expected a nonempty list of jumps")
            out = []
            for i, entry in enumerate(jumps):
                p = f"{path}.jumps[{i}]"
                alpha = _complex(_require(entry, 'alpha', p), f"{p}.alpha")
                if alpha == 0:
                    raise ConfigParseError(f"{p}.alpha", "jump amplitude must be nonzero")
                if 'unitary' in entry:
                    _unitary_from_json(entry['unitary'], n, f"{p}.unitary")
                    out.append({'alpha': _complex_to_json(alpha), 'unitary': entry['unitary']})
                else:
                    phase = _phase_label(entry, p)
                    _pauli(_require(entry, 'pauli', p), n, f"{p}.pauli")
                    out.append({'alpha': _complex_to_json(alpha), 'pauli': entry['pauli'].upper(), 'phase': phase})
            return {'type': kind, 'jumps': out}
        # timedep
        jumps = _require(raw, 'jumps', path)
        if not isinstance(jumps, list) or not jumps:
            raise ConfigParseError(f"{path}.jumps", "expected a nonempty list of jumps")
        out = []
        for i, entry in enumerate(jumps):
            p = f"{path}.jumps[{i}]"
            _pauli(_require(entry, 'pauli', p), n, f"{p}.pauli")
            try:
                profile = profile_from_dict(_require(entry, 'profile', p))
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigParseError(f"{p}.profile", str(e))
            out.append({'pauli': entry['pauli'].upper(), 'profile': profile.to_dict()})
        return {'type': kind, 'jumps': out}

    @classmethod
    def from_json(cls, text: str) -> 'ModelConfig':
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigParseError(f"line {e.lineno}", e.msg)
        return cls.from_dict(data)

    # ---- serialization ----

    def to_dict(self) -> dict:
        data = {'n_qubits': self.n_qubits}
        if self.name is not None:
            data['name'] = self.name
        data['hamiltonian'] = [dict(t) for t in self.hamiltonian]
        data['dissipator'] = json.loads(json.dumps(self.dissipator))
        data['initial_state'] = json.loads(json.dumps(self.initial_state))
        data['observable'] = [dict(t) for t in self.observable]
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    # ---- conversion ----

    @property
    def is_time_dependent(self) -> bool:
        return self.dissipator['type'] == 'timedep'

    def hamiltonian_spec(self) -> HamiltonianSpec:
        terms = [(t['coeff'], PauliString.from_label(t['pauli'], t['phase'])) for t in self.hamiltonian]
        return HamiltonianSpec.from_real_terms(self.n_qubits, terms)

    def jumps(self) -> Tuple[JumpSpec, ...]:
        d, n = self.dissipator, self.n_qubits
        kind = d['type']
        if kind == 'depolarizing':
            return depolarizing_jumps(n, d['gamma'])
        if kind == 'dephasing':
            return dephasing_jumps(n, d['Gamma'])
        if kind == 'pauli':
            return pauli_rate_jumps(d['probs'])
        if kind == 'custom':
            out = []
            for i, j in enumerate(d['jumps']):
                alpha = _complex(j['alpha'], f"dissipator.jumps[{i}].alpha")
                if 'unitary' in j:
                    out.append(JumpSpec.from_unitary(alpha, _unitary_from_json(j['unitary'], n, 'unitary')))
                else:
                    u = PauliString.from_label(j['pauli'], j['phase'])
                    out.append(JumpSpec(((abs(alpha), PauliString(u.letters, u.phase * alpha / abs(alpha))),),
                                        (alpha, u)))
            return tuple(out)
        return ()

    def reset_term(self) -> Optional[ResetTerm]:
        if self.dissipator['type'] != 'reset':
            return None
        q = self.dissipator['q']
        return ResetTerm(-np.log(q), _ensemble(self.dissipator['ensemble'], self.n_qubits, 'dissipator.ensemble'))

    def to_lindblad_spec(self) -> LindbladSpec:
        if self.is_time_dependent:
            raise ValueError("Time-dependent model: use timedep_dissipator()")
        return LindbladSpec(self.hamiltonian_spec(), self.jumps(), self.reset_term())

    def timedep_dissipator(self) -> TimeDepDissipator:
        if not self.is_time_dependent:
            raise ValueError("Model dissipator is time independent")
        return TimeDepDissipator(self.n_qubits, tuple(
            (profile_from_dict(j['profile']), PauliString(j['pauli'])) for j in self.dissipator['jumps']
        ))

    def initial(self) -> Union[StateVector, Tuple[Tuple[float, StateVector], ...]]:
        if 'ensemble' in self.initial_state:
            return _ensemble(self.initial_state['ensemble'], self.n_qubits, 'initial_state.ensemble')
        return _state(self.initial_state, self.n_qubits, 'initial_state')

    def observable_matrix(self) -> Optional[np.ndarray]:
        if not self.observable:
            return None
        dim = 2 ** self.n_qubits
        o = np.zeros((dim, dim), dtype=complex)
        for t in self.observable:
            o += t['coeff'] * pauli_to_matrix(PauliString(t['pauli']))
        return o


def _unitary_from_json(raw, n_qubits: int, path: str) -> np.ndarray:
    dim = 2 ** n_qubits
    if not isinstance(raw, list) or len(raw) != dim or any(not isinstance(row, list) or len(row) != dim for row in raw):
        raise ConfigParseError(path, f"expected a {dim}x{dim} matrix")
    m = np.array([[_complex(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)] for i, row in enumerate(raw)])
    if np.max(np.abs(m.conj().T @ m - np.eye(dim))) > 1e-10:
        raise ConfigParseError(path, "matrix is not unitary")
    return m


def load_model_config(path: str) -> ModelConfig:
    """Read and parse a model file; I/O problems are reported as parse errors"""
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ConfigParseError(str(path), f"cannot read config: {e.strerror}")
    cfg = ModelConfig.from_json(text)
    logger.info(f"Loaded model config {path} ({cfg.n_qubits} qubits, dissipator {cfg.dissipator['type']})")
    return cfg
