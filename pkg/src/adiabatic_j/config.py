"""Experiment configuration: JSON with an explicit schema version."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .forms import FormField, ddbar
from .grid import Grid4, ddbar_coefficient, fourier_field

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "grid": {"n_fiber": 16, "n_base": 16},
    "k_list": [16, 32, 64, 128],
    "orders": [0, 1, 2],
    "order": 2,
    "k_solve": 32,
    "jnef_k_list": [64, 128, 256, 512, 1024, 2048, 4096, 8192],
    "tolerances": {"newton": 1e-9, "cg": 1e-11, "normalize": 1e-10, "newton_maxiter": 12},
    "output_dir": "out",
    "seed": 0,
}
_TOP_KEYS = set(DEFAULTS) | {"chi", "omega_X", "omega_B", "description"}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _terms(spec, where, ndim):
    terms = []
    for i, t in enumerate(spec.get("terms", [])):
        try:
            freq = [int(f) for f in t["freq"]]
            amp = float(t["amp"])
            phase = float(t.get("phase", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.terms[{i}]: {exc}") from None
        if len(freq) not in (ndim, 4):
            raise ConfigError(f"{where}.terms[{i}]: frequency must have {ndim} entries")
        terms.append((freq, amp, phase))
    return terms


def _constant_matrix(spec, where):
    try:
        c = np.array(spec["constant"], dtype=complex)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.constant: {exc}") from None
    if "constant_imag" in spec:
        c = c + 1j * np.array(spec["constant_imag"], dtype=float)
    if c.shape != (2, 2) or not np.allclose(c, c.conj().T):
        raise ConfigError(f"{where}.constant must be a Hermitian 2x2 matrix")
    return c


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.  ``raw`` holds the merged JSON document."""

    raw: dict

    # construction
    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if d.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {d.get('schema_version')}")
        for key in ("chi", "omega_X", "omega_B"):
            if key not in d:
                raise ConfigError(f"missing required key {key!r}")
        cfg = cls(_merge(DEFAULTS, d))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        return cls.from_dict(d)

    def to_json(self):
        return json.dumps(self.raw, indent=2, sort_keys=True) + "\n"

    @property
    def hash(self):
        """SHA-256 of the canonical JSON without the output directory."""
        d = {k: v for k, v in self.raw.items() if k != "output_dir"}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    # accessors
    @property
    def grid(self):
        g = self.raw["grid"]
        try:
            return Grid4(int(g["n_fiber"]), int(g["n_base"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"grid: {exc}") from None

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def tolerances(self):
        return self.raw["tolerances"]

    def _form(self, key):
        spec = self.raw[key]
        g = self.grid
        c = _constant_matrix(spec, key)
        pot = fourier_field(g, _terms(spec, key, 4))
        return FormField.constant(g, c) + ddbar(pot)

    def chi(self):
        return self._form("chi")

    def omega_X(self):
        return self._form("omega_X")

    def omega_B(self):
        spec = self.raw["omega_B"]
        g = self.grid
        try:
            c = float(spec["constant"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"omega_B.constant: {exc}") from None
        pot = fourier_field(g, _terms(spec, "omega_B", 2), base=True)
        return c + np.real(ddbar_coefficient(pot, "z", "z"))

    # validation
    def validate(self):
        """Check ranges, band limits and positivity; returns a margin report."""
        g = self.grid
        r = self.raw
        for key, ndim, n in (("chi", 4, None), ("omega_X", 4, None), ("omega_B", 2, None)):
            for freq, _, _ in _terms(r[key], key, ndim):
                sizes = g.shape if len(freq) == 4 else g.base_shape
                for f, size in zip(freq, sizes):
                    if abs(f) > size // 4:
                        raise ConfigError(f"{key}: frequency {freq} exceeds the band limit n/4")
        ks = r["k_list"]
        if len(ks) < 3 or any(float(k) <= 0 for k in ks):
            raise ConfigError("k_list needs at least three positive values")
        if any(float(k) <= 0 for k in r["jnef_k_list"]) or len(r["jnef_k_list"]) < 3:
            raise ConfigError("jnef_k_list needs at least three positive values")
        if not 0 <= int(r["order"]) <= 6 or any(not 0 <= int(o) <= 6 for o in r["orders"]):
            raise ConfigError("orders must lie in 0..6")
        if float(r["k_solve"]) <= 0:
            raise ConfigError("k_solve must be positive")
        chi_m, _ = self.chi().positivity_margin()
        om = self.omega_X()
        vert = float(om.ww.min())
        base = float(self.omega_B().min())
        report = {"chi_margin": chi_m, "omega_X_vertical_margin": vert, "omega_B_margin": base}
        if chi_m <= 0:
            raise ConfigError(f"chi is not positive (margin {chi_m:.3e})")
        if vert <= 0:
            raise ConfigError(f"omega_X is not relatively Kahler (vertical margin {vert:.3e})")
        if base <= 0:
            raise ConfigError(f"omega_B is not positive (margin {base:.3e})")
        return report
