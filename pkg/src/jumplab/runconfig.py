"""Run configuration: INI-style sections, fail closed.

Unknown sections, unknown keys and out-of-range values abort before any
computation starts.  Every key can also be set on the command line with
``--set section.key=value``; command-line values win.  The grammar is
documented in the README.
"""

import configparser
from dataclasses import dataclass

from .geometry import TorusDomain
from .kernels import FAMILIES, KernelSpec, RadialKernel
from .lattice import LatticeGrid, LatticeKernels


class ConfigError(ValueError):
    pass


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _float(text):
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {text!r}") from exc


def _int(text):
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _optional_float(text):
    t = text.strip()
    return None if not t else _float(t)


def _optional_str(text):
    t = text.strip()
    return None if not t else t


def _choice(options):
    def convert(text):
        t = text.strip()
        if t not in options:
            raise ConfigError(f"expected one of {options}, got {text!r}")
        return t

    return convert


SCHEMA = {
    "domain": {
        "dimension": (_int, "1"),
        "side_length": (_float, "200.0"),
    },
    "kernels": {
        "a_family": (_choice(FAMILIES), "top-hat"),
        "a_amplitude": (_float, "0.5"),
        "a_scale": (_float, "1.0"),
        "a_cutoff": (_optional_float, ""),
        "phi_family": (_choice(FAMILIES), "top-hat"),
        "phi_amplitude": (_float, "0.5"),
        "phi_scale": (_float, "0.5"),
        "phi_cutoff": (_optional_float, ""),
        "exclude_self_term": (_bool, "false"),
    },
    "initial": {
        "kind": (_choice(("poisson", "jittered-grid", "custom-field")),
                 "poisson"),
        "kappa": (_float, "0.3"),
        "per_axis": (_int, "10"),
        "jitter": (_float, "0.5"),
        "bound_constant": (_optional_float, ""),
        "field_file": (_optional_str, ""),
    },
    "dynamics": {
        "t_end": (_float, "2.0"),
        "snapshot_dt": (_float, "0.5"),
        "replicas": (_int, "100"),
        "seed": (_int, "1"),
        "threads": (_int, "1"),
    },
    "estimators": {
        "bins": (_int, "10"),
        "r_max": (_optional_float, ""),
        "third_moment": (_bool, "false"),
        "variance_window": (_float, "0.0"),
    },
    "hierarchy": {
        "lattice_dimension": (_int, "1"),
        "sites_per_axis": (_int, "32"),
        "spacing": (_float, "0.25"),
        "n_max": (_int, "2"),
        "qy_order": (_int, "1"),
        "closure": (_choice(("poisson-tail", "zero-tail")), "poisson-tail"),
        "mode": (_choice(("ti", "grid")), "ti"),
        "integrator": (_choice(("rk4", "taylor")), "rk4"),
        "dt": (_float, "0.005"),
        "taylor_order": (_int, "24"),
        "t_end": (_float, "2.0"),
        "use_horizon_fraction": (_bool, "false"),
        "horizon_fraction": (_float, "0.5"),
        "overflow_guard": (_float, "1e12"),
    },
    "scheduler": {
        "epsilon": (_float, "0.1"),
        "t_target": (_float, "1.0"),
        "max_steps": (_int, "1000000"),
    },
    "outputs": {
        "directory": (str, "out"),
        "write_snapshots": (_bool, "false"),
    },
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, section):
        return self.values[section]

    def get(self, section, key):
        return self.values[section][key]

    # --- constructors for the objects the commands consume -------------

    def domain(self):
        return TorusDomain(self.get("domain", "dimension"),
                           self.get("domain", "side_length"))

    def kernels(self, dimension=None):
        d = dimension if dimension is not None else self.get(
            "domain", "dimension")
        sec = self.values["kernels"]
        ka = RadialKernel(sec["a_family"], sec["a_amplitude"], sec["a_scale"],
                          d, cutoff=sec["a_cutoff"])
        kp = RadialKernel(sec["phi_family"], sec["phi_amplitude"],
                          sec["phi_scale"], d, cutoff=sec["phi_cutoff"])
        return KernelSpec(ka, kp, exclude_self_term=sec["exclude_self_term"])

    def lattice_grid(self):
        sec = self.values["hierarchy"]
        return LatticeGrid(sec["lattice_dimension"], sec["sites_per_axis"],
                           sec["spacing"])

    def lattice_kernels(self):
        grid = self.lattice_grid()
        return LatticeKernels(grid, self.kernels(dimension=grid.dimension))

    def bound_constant(self):
        c = self.get("initial", "bound_constant")
        if c is None:
            c = self.get("initial", "kappa")
        if c <= 0:
            raise ConfigError("the bound constant must be positive")
        return c

    def manifest_entry(self):
        return {s: dict(v) for s, v in self.values.items()}


def _defaults():
    return {
        section: {key: conv(default) for key, (conv, default) in keys.items()}
        for section, keys in SCHEMA.items()
    }


def load_config(path=None, overrides=()):
    """Parse, override and validate a run configuration.

    ``overrides`` are ``section.key=value`` strings (command line wins
    over the file, the file wins over defaults).  Unknown names fail.
    """
    values = _defaults()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(
                        f"unknown key {key!r} in section [{section}]")
                conv, _ = SCHEMA[section][key]
                values[section][key] = conv(raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(
                f"override must look like section.key=value, got {item!r}")
        name, raw = item.split("=", 1)
        section, key = name.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown override target {name!r}")
        conv, _ = SCHEMA[section][key]
        values[section][key] = conv(raw)
    _validate(values)
    return RunConfig(values=values)


def _validate(values):
    dom = values["domain"]
    if dom["dimension"] not in (1, 2, 3):
        raise ConfigError("domain.dimension must be 1, 2 or 3")
    if dom["side_length"] <= 0:
        raise ConfigError("domain.side_length must be positive")
    kern = values["kernels"]
    for prefix in ("a", "phi"):
        if kern[f"{prefix}_amplitude"] < 0:
            raise ConfigError(f"kernels.{prefix}_amplitude must be >= 0")
        if kern[f"{prefix}_scale"] <= 0:
            raise ConfigError(f"kernels.{prefix}_scale must be > 0")
    if values["initial"]["kappa"] < 0:
        raise ConfigError("initial.kappa must be nonnegative")
    dyn = values["dynamics"]
    if dyn["t_end"] <= 0 or dyn["snapshot_dt"] <= 0:
        raise ConfigError("dynamics times must be positive")
    if dyn["replicas"] < 1:
        raise ConfigError("dynamics.replicas must be >= 1")
    if dyn["threads"] < 1:
        raise ConfigError("dynamics.threads must be >= 1")
    est = values["estimators"]
    if est["bins"] < 1:
        raise ConfigError("estimators.bins must be >= 1")
    hier = values["hierarchy"]
    if hier["lattice_dimension"] not in (1, 2):
        raise ConfigError("hierarchy.lattice_dimension must be 1 or 2")
    if hier["n_max"] not in (2, 3):
        raise ConfigError("hierarchy.n_max must be 2 or 3")
    if hier["qy_order"] not in (0, 1, 2):
        raise ConfigError("hierarchy.qy_order must be 0, 1 or 2")
    if hier["dt"] <= 0 or hier["t_end"] <= 0:
        raise ConfigError("hierarchy times must be positive")
    if not 0 < hier["horizon_fraction"] < 1:
        raise ConfigError("hierarchy.horizon_fraction must lie in (0, 1)")
    sched = values["scheduler"]
    if not 0 < sched["epsilon"] < 1:
        raise ConfigError("scheduler.epsilon must lie in (0, 1)")
    if sched["t_target"] <= 0:
        raise ConfigError("scheduler.t_target must be positive")
    if sched["max_steps"] < 1:
        raise ConfigError("scheduler.max_steps must be >= 1")
