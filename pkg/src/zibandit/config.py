"""Plain-text experiment configuration.

Grammar::

    file    := { line }
    line    := blank | comment | (header | pair) [ws comment]
    comment := ("#" | ";") text
    header  := "[" ("experiment" | "env" | "policy") "]"
    pair    := key "=" value

``[experiment]`` and ``[env]`` appear at most once; every ``[policy]``
block starts a new policy. Values are ``none``, ``true``/``false``,
integers, floats, comma-separated float lists or bare strings. Unknown
keys and sections are errors reported with line and column.

``[experiment]`` keys
    kind (``mab`` | ``contextual``), horizon, replications, master_seed,
    checkpoints, full_trace.
``[env]`` keys
    k, noise (``gaussian`` | ``mixture`` | ``exponential`` | ``student_t``),
    noise_variance, mixture_weights, mixture_means, mixture_variances,
    exp_rate, t_df; MAB only: p_lo, p_hi, mu_lo, mu_hi; contextual only: d,
    sparsity, link_h.
``[policy]`` keys
    name (a registered algorithm), label (defaults to name) and any
    constructor parameter of the algorithm.
"""

import re
from dataclasses import dataclass

from .distributions import CenteredExponential, Gaussian, GaussianMixture, StudentT
from .env import CbEnvSpec, MabEnvSpec
from .glm import CONTEXTUAL_POLICIES
from .harness import ExperimentConfig
from .mab import MAB_POLICIES


class ConfigError(ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


EXPERIMENT_KEYS = {
    "kind": "mab",
    "horizon": 1000,
    "replications": 1,
    "master_seed": 0,
    "checkpoints": 200,
    "full_trace": False,
}
NOISE_KEYS = {
    "noise": "gaussian",
    "noise_variance": 1.0,
    "mixture_weights": (0.5, 0.5),
    "mixture_means": (-1.0, 1.0),
    "mixture_variances": (0.5, 0.5),
    "exp_rate": 1.0,
    "t_df": 3.0,
}
MAB_ENV_KEYS = {"k": 10, "p_lo": 0.30, "p_hi": 0.35, "mu_lo": 1.0, "mu_hi": 3.0, **NOISE_KEYS}
CB_ENV_KEYS = {"k": 100, "d": 10, "sparsity": 7, "link_h": "probit", **NOISE_KEYS}


@dataclass
class _Entry:
    value: object
    line: int
    column: int


def parse_value(text):
    low = text.lower()
    if low == "none":
        return None
    if low in ("true", "false"):
        return low == "true"
    if "," in text:
        try:
            return tuple(float(part) for part in text.split(","))
        except ValueError:
            raise ValueError(f"list values must be numbers, got {text!r}") from None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _tokenize(text):
    """Yield ``(section, entries)`` blocks in file order."""
    blocks = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        # inline comments need a preceding space so "a#b" stays a value
        raw = re.split(r"\s[#;]", raw, maxsplit=1)[0]
        stripped = raw.strip()
        if not stripped or stripped[0] in "#;":
            continue
        col = raw.index(stripped[0]) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("unterminated section header", lineno, col)
            name = stripped[1:-1].strip()
            if name not in ("experiment", "env", "policy"):
                raise ConfigError(f"unknown section [{name}]", lineno, col)
            current = (name, {}, lineno)
            blocks.append(current)
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", lineno, col)
        if current is None:
            raise ConfigError("key outside of any section", lineno, col)
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("empty key", lineno, col)
        if key in current[1]:
            raise ConfigError(f"duplicate key {key!r}", lineno, col)
        vcol = raw.index("=") + 2 + (len(raw[raw.index("=") + 1 :]) - len(raw[raw.index("=") + 1 :].lstrip()))
        try:
            parsed = parse_value(value)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, vcol) from None
        current[1][key] = _Entry(parsed, lineno, col)
    return blocks


def _resolve(entries, defaults, section):
    out = dict(defaults)
    for key, entry in entries.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} in [{section}]", entry.line, entry.column)
        out[key] = _coerce(entry, defaults[key], key)
    return out


def _coerce(entry, default, key):
    val = entry.value
    if default is None or val is None:
        return val
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{key} must be true or false", entry.line, entry.column)
        return val
    if isinstance(default, int):
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{key} must be an integer", entry.line, entry.column)
        return val
    if isinstance(default, float):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{key} must be a number", entry.line, entry.column)
        return float(val)
    if isinstance(default, tuple):
        if isinstance(val, (int, float)) and not isinstance(val, bool):
            return (float(val),)
        if not isinstance(val, tuple):
            raise ConfigError(f"{key} must be a comma-separated list", entry.line, entry.column)
        return val
    if isinstance(default, str) and not isinstance(val, str):
        raise ConfigError(f"{key} must be a string", entry.line, entry.column)
    return val


def build_noise(env):
    kind = env["noise"]
    if kind == "gaussian":
        return Gaussian(env["noise_variance"])
    if kind == "mixture":
        return GaussianMixture(env["mixture_weights"], env["mixture_means"], env["mixture_variances"])
    if kind == "exponential":
        return CenteredExponential(env["exp_rate"])
    if kind == "student_t":
        return StudentT(env["t_df"])
    raise ValueError(f"unknown noise {kind!r}")


def _build_policy(entries, registry, lineno):
    if "name" not in entries:
        raise ConfigError("policy block needs a 'name'", lineno, 1)
    name_entry = entries["name"]
    name = name_entry.value
    if name not in registry:
        raise ConfigError(
            f"unknown algorithm {name!r}; choose from {sorted(registry)}",
            name_entry.line,
            name_entry.column,
        )
    est = registry[name]()
    label = entries["label"].value if "label" in entries else name
    defaults = est.get_params()
    params = {}
    for key, entry in entries.items():
        if key in ("name", "label"):
            continue
        if key not in defaults:
            raise ConfigError(f"unknown parameter {key!r} for {name}", entry.line, entry.column)
        params[key] = _coerce(entry, defaults[key], key)
    est.set_params(**params)
    return str(label), name, est


@dataclass
class LoadedConfig:
    experiment: ExperimentConfig
    sections: dict  # resolved experiment/env values
    policy_names: list

    def manifest(self):
        """Resolved configuration as ``key = value`` text."""
        lines = ["[experiment]"]
        for key, val in self.sections["experiment"].items():
            lines.append(f"{key} = {_fmt(val)}")
        lines.append("")
        lines.append("[env]")
        for key, val in self.sections["env"].items():
            lines.append(f"{key} = {_fmt(val)}")
        for (label, est), name in zip(self.experiment.policies, self.policy_names):
            lines.append("")
            lines.append("[policy]")
            lines.append(f"name = {name}")
            lines.append(f"label = {label}")
            for key, val in sorted(est.get_params().items()):
                lines.append(f"{key} = {_fmt(val)}")
        return "\n".join(lines) + "\n"


def _fmt(val):
    if val is None:
        return "none"
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, float):
        return format(val, ".17g")
    if isinstance(val, tuple):
        return ",".join(format(v, ".17g") for v in val)
    return str(val)


def load_config(text, seed_override=None):
    """Parse config text into a :class:`LoadedConfig`."""
    blocks = _tokenize(text)
    exp_entries, env_entries, policies = None, None, []
    for name, entries, lineno in blocks:
        if name == "experiment":
            if exp_entries is not None:
                raise ConfigError("[experiment] appears twice", lineno, 1)
            exp_entries = entries
        elif name == "env":
            if env_entries is not None:
                raise ConfigError("[env] appears twice", lineno, 1)
            env_entries = entries
        else:
            policies.append((entries, lineno))
    experiment = _resolve(exp_entries or {}, EXPERIMENT_KEYS, "experiment")
    if seed_override is not None:
        experiment["master_seed"] = int(seed_override)
    kind = experiment["kind"]
    if kind not in ("mab", "contextual"):
        entry = (exp_entries or {}).get("kind")
        raise ConfigError(f"kind must be mab or contextual, got {kind!r}",
                          entry.line if entry else None, entry.column if entry else None)
    env_defaults = MAB_ENV_KEYS if kind == "mab" else CB_ENV_KEYS
    env = _resolve(env_entries or {}, env_defaults, "env")
    if not policies:
        raise ConfigError("at least one [policy] block is required")
    registry = MAB_POLICIES if kind == "mab" else CONTEXTUAL_POLICIES
    built = [_build_policy(entries, registry, lineno) for entries, lineno in policies]
    try:
        noise = build_noise(env)
        if kind == "mab":
            spec = MabEnvSpec(env["k"], (env["p_lo"], env["p_hi"]), (env["mu_lo"], env["mu_hi"]),
                              noise, experiment["horizon"])
        else:
            spec = CbEnvSpec(env["k"], env["d"], env["sparsity"], env["link_h"], noise,
                             experiment["horizon"])
        cfg = ExperimentConfig(
            kind,
            spec,
            [(label, est) for label, _, est in built],
            n_reps=experiment["replications"],
            master_seed=experiment["master_seed"],
            n_checkpoints=experiment["checkpoints"],
            full_trace=experiment["full_trace"],
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return LoadedConfig(cfg, {"experiment": experiment, "env": env}, [name for _, name, _ in built])


def load_config_file(path, seed_override=None):
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read(), seed_override)
