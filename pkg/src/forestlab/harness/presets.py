"""Table presets reproducing the published experiment grids.

Each preset is a list of :class:`ExperimentConfig`, one per table column.
The replication tables (1-3) vary SNR over {0.05, 1, 6} on the original
and on the normalized regression function.  The covariate-effect tables
fix SNR = 1, n = 250 and mtry = floor(p/3) on normalized functions; the
``appendixC_*`` presets rerun those three tables at SNR 0.05 and 6.

``table7_joint`` is a 9 x 3 grid (model x irrelevant count, by rho); it
is returned flat as 27 configs in row-major order.
"""

from __future__ import annotations

from forestlab.errors import InputError
from forestlab.harness.config import ExperimentConfig

SNRS = (0.05, 1.0, 6.0)

_REPLICATION = {
    "table1": dict(model="linear", law="normal", p_total=5, n=100, mtry_forest="p/3", name="N-LINEAR"),
    "table2": dict(model="mars", law="uniform", p_total=5, n=200, mtry_forest="p/3", name="U-MARS"),
    "table3": dict(model="hidden", law="uniform", p_total=2, n=500, mtry_forest="p/2", name="U-HIDDEN"),
}

_SECTION4 = dict(n=250, mtry_forest="p/3", normalized=True)

_BASE_MODELS = (("linear", "normal", "N-LINEAR"), ("mars", "uniform", "U-MARS"), ("hidden", "uniform", "U-HIDDEN"))

_IRRELEVANT_COUNTS = {"linear": (1, 25), "mars": (1, 25), "hidden": (1, 13)}
_JOINT_COUNTS = {"linear": (1, 25, 55), "mars": (1, 25, 55), "hidden": (1, 13, 28)}
_RELEVANT = {"linear": 5, "mars": 5, "hidden": 2}

PRESET_NAMES = ("table1", "table2", "table3", "table4_dist", "table5_irrelevant", "table6_rho",
                "table7_joint", "appendixC_low", "appendixC_high")


def _replication(name: str) -> list[dict]:
    spec = dict(_REPLICATION[name])
    label = spec.pop("name")
    cols = []
    for normalized in (False, True):
        for snr in SNRS:
            scale = "normalized" if normalized else "original"
            cols.append(dict(spec, snr=snr, normalized=normalized,
                             label=f"{name} {label} {scale} SNR={snr:g}"))
    return cols


def _distribution(snr: float, tag: str) -> list[dict]:
    cols = []
    for model, _, upper in _BASE_MODELS:
        for law, short in (("normal", "N"), ("uniform", "U")):
            cols.append(dict(_SECTION4, model=model, law=law, p_total=_RELEVANT[model], snr=snr,
                             label=f"{tag} {short}-{upper.split('-')[1]} SNR={snr:g}"))
    return cols


def _irrelevant(snr: float, tag: str) -> list[dict]:
    cols = []
    for model, law, name in _BASE_MODELS:
        for k in _IRRELEVANT_COUNTS[model]:
            p = _RELEVANT[model] + k
            cols.append(dict(_SECTION4, model=model, law=law, p_total=p, snr=snr,
                             label=f"{tag} {name} irrelevant={k} (p={p}) SNR={snr:g}"))
    return cols


def _correlated(snr: float, tag: str) -> list[dict]:
    cols = []
    for model, _, upper in _BASE_MODELS:
        for rho in (0.0, 0.5):
            cols.append(dict(_SECTION4, model=model, law="equicorrelated", rho=rho,
                             p_total=_RELEVANT[model], snr=snr,
                             label=f"{tag} N-{upper.split('-')[1]} rho={rho:g} SNR={snr:g}"))
    return cols


def _joint() -> list[dict]:
    cols = []
    for model, _, upper in _BASE_MODELS:
        for k in _JOINT_COUNTS[model]:
            p = _RELEVANT[model] + k
            for rho in (0.0, 0.5, 0.9):
                cols.append(dict(_SECTION4, model=model, law="equicorrelated", rho=rho, p_total=p, snr=1.0,
                                 label=f"table7_joint N-{upper.split('-')[1]} irrelevant={k} (p={p}) rho={rho:g}"))
    return cols


def preset_columns(name: str) -> list[dict]:
    """Config field values (without protocol scale) for each column of a preset."""
    if name in _REPLICATION:
        return _replication(name)
    if name == "table4_dist":
        return _distribution(1.0, name)
    if name == "table5_irrelevant":
        return _irrelevant(1.0, name)
    if name == "table6_rho":
        return _correlated(1.0, name)
    if name == "table7_joint":
        return _joint()
    if name in ("appendixC_low", "appendixC_high"):
        snr = 0.05 if name == "appendixC_low" else 6.0
        return _distribution(snr, name) + _irrelevant(snr, name) + _correlated(snr, name)
    raise InputError(f"unknown preset {name!r}; valid presets are {', '.join(PRESET_NAMES)}")


def preset_configs(name: str, **overrides) -> list[ExperimentConfig]:
    """Configs for every column of preset `name`.

    `overrides` replace protocol fields such as W, B, test_size,
    master_seed or workers (None values are ignored); the DGP settings of
    each column are fixed by the preset.
    """
    protected = {"model", "law", "rho", "p_total", "snr", "normalized", "n", "mtry_forest", "label"}
    bad = protected & {k for k, v in overrides.items() if v is not None}
    if bad:
        raise InputError(f"{sorted(bad)[0]}: fixed by the preset and cannot be overridden")
    extra = {k: v for k, v in overrides.items() if v is not None}
    return [ExperimentConfig(**col, **extra) for col in preset_columns(name)]


def run_table_preset(name: str, **overrides) -> list:
    """Run every column of a preset and return its ReportRows."""
    from forestlab.harness.experiment import run_experiment

    return [run_experiment(c) for c in preset_configs(name, **overrides)]
