"""Command-line front end.

Subcommands: validate, decode, sweep, threshold, sample, export. Options can
come from flags or from an experiment config (``--config file.json``);
explicit flags win. Syndromes are given as bit strings, 1 meaning the check
fired.

Seed expansion: the root ``--seed`` feeds ``SeedSequence(seed).spawn(2)``;
child 0 drives the decoder (MLE tie breaks, sampler chains, hybrid seeds),
child 1 drives the ``sample`` command's chains.

Exit codes: 0 ok, 2 bad config/code/input, 3 parity-bit invariant broken,
4 size cap exceeded, 5 threshold interval does not bracket.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .cpc import (
    PAULI_CLASSES,
    build_propagation_model,
    code_distance,
    derive_check_sets,
    load_code,
)
from .decoders import STRATEGIES, make_decoder
from .error_model import FAMILIES, ErrorModel, QubitErrorRates
from .evaluation import format_sweep_csv, sweep, threshold_bisection
from .exceptions import BracketError, CapacityError, ConventionError, CpcError
from .ising import (
    build_decode_hamiltonian,
    build_time_extended,
    dumps_model,
    syndrome_from_bits,
)
from .samplers import GibbsBackend, SamplerConfig, format_samples, gibbs_sample, simulated_annealing

log = logging.getLogger("cpcising")

EXIT_OK, EXIT_INPUT, EXIT_CONVENTION, EXIT_CAPACITY, EXIT_BRACKET = 0, 2, 3, 4, 5

_RATES = {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "code": {"type": "string"},
        "error_model": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["p_x", "p_z"],
                    "properties": {"p_x": _RATES, "p_z": _RATES, "p_y": _RATES},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["family"],
                    "properties": {"family": {"enum": list(FAMILIES)}, "p": _RATES},
                },
            ]
        },
        "strategies": {"type": "array", "items": {"enum": list(STRATEGIES)}, "minItems": 1},
        "grid": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "num"],
                    "properties": {
                        "start": {"type": "number"},
                        "stop": {"type": "number"},
                        "num": {"type": "integer", "minimum": 1},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["values"],
                    "properties": {"values": {"type": "array", "items": {"type": "number"}}},
                },
            ]
        },
        "bisection": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "bracket": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
            },
        },
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sweeps": {"type": "integer", "minimum": 1},
                "burn_in": {"type": "integer", "minimum": 0},
                "chains": {"type": "integer", "minimum": 1},
                "temperature": {"type": "number", "exclusiveMinimum": 0},
                "method": {"enum": ["gibbs", "metropolis"]},
                "mode": {"enum": ["gibbs", "anneal"]},
                "samples": {"type": "integer", "minimum": 1},
            },
        },
        "syndromes": {"type": "array", "items": {"type": "string", "pattern": "^[01]*$"}},
        "time_rounds": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
    },
}


class UsageError(CpcError):
    """Bad command-line or config input."""


def load_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"config {path}: {where}: {exc.message}") from exc
    return data


# ---------------------------------------------------------------------------
# option resolution


class Options:
    """Flags layered over the config file."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, flag: str, key: str | None = None, default=None):
        value = getattr(self.args, flag, None)
        if value is not None:
            return value
        return self.config.get(key or flag, default)

    def code(self):
        return load_code(self.get("code", default="513"))

    def seed(self) -> int:
        return int(self.get("seed", default=0))

    def family(self) -> str:
        fam = self.args.family or self.config.get("error_model", {}).get("family")
        if fam is None:
            raise UsageError("need --family (or an error_model family block in the config)")
        return fam

    def rates(self) -> QubitErrorRates:
        a = self.args
        if a.px is not None or a.pz is not None:
            if a.px is None or a.pz is None:
                raise UsageError("--px and --pz must be given together")
            return QubitErrorRates(a.px, a.pz, a.py or 0.0)
        if a.family is not None and a.p is not None:
            return QubitErrorRates.from_family(a.family, a.p)
        block = dict(self.config.get("error_model", {}))
        if a.family is not None:
            block["family"] = a.family
        if a.p is not None:
            block["p"] = a.p
        if "p_x" in block:
            return QubitErrorRates(block["p_x"], block["p_z"], block.get("p_y", 0.0))
        if "family" in block and "p" in block:
            return QubitErrorRates.from_family(block["family"], block["p"])
        raise UsageError("need error rates: --px/--pz[/--py] or --family with --p")

    def strategies(self, default) -> list[str]:
        if self.args.strategy:
            return list(self.args.strategy)
        return list(self.config.get("strategies", default))

    def syndromes(self, r: int) -> list[np.ndarray]:
        raw = list(self.args.syndrome or self.config.get("syndromes", []))
        if not raw:
            raise UsageError("need at least one --syndrome")
        out = []
        for bits in raw:
            if len(bits) != r or set(bits) - {"0", "1"}:
                raise UsageError(f"syndrome {bits!r} must be {r} bits of 0/1 (n-k = {r})")
            out.append(syndrome_from_bits(bits))
        return out

    def sampler(self, seed) -> tuple[SamplerConfig, dict]:
        block = dict(self.config.get("sampler", {}))
        a = self.args
        for name in ("sweeps", "burn_in", "chains", "method", "samples"):
            if getattr(a, name, None) is not None:
                block[name] = getattr(a, name)
        extra = {"mode": block.pop("mode", "gibbs"), "samples": block.pop("samples", 10_000)}
        cfg = SamplerConfig(seed=seed, threads=int(self.get("threads", default=1)), **block)
        return cfg, extra


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _child_seeds(seed: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(2)


# ---------------------------------------------------------------------------
# commands


def cmd_validate(opts: Options) -> int:
    code = opts.code()
    print(f"code {code.name or '?'}")
    print(f"n {code.n}")
    print(f"k {code.k}")
    print(f"convention {code.convention}")
    try:
        prop = build_propagation_model(code)
    except ConventionError as exc:
        print(f"inv-x FAIL parity qubit {exc.parity_qubit}: {exc}")
        return EXIT_CONVENTION
    print("inv-x ok")
    d = code_distance(prop)
    print(f"distance {d}")
    checks = derive_check_sets(prop)
    labels = prop.explicit_labels
    for j, q in enumerate(checks.sets):
        loop = " (self)" if checks.self_loop[j] else ""
        print(f"check {j + 1}: {' '.join(labels[v] for v in q)}{loop}")
    return EXIT_OK


def cmd_decode(opts: Options) -> int:
    prop = build_propagation_model(opts.code())
    syndromes = opts.syndromes(prop.r)
    rates = opts.rates()
    em = ErrorModel(rates, prop.n)
    strategy = opts.strategies(["mle"])
    if len(strategy) != 1:
        raise UsageError("decode takes exactly one --strategy")
    strategy = strategy[0]
    decoder_seed = _child_seeds(opts.seed())[0]
    rng = np.random.default_rng(decoder_seed)
    kwargs = {}
    if strategy == "sampler":
        cfg, extra = opts.sampler(decoder_seed)
        kwargs.update(sampler=GibbsBackend(cfg), num_samples=extra["samples"])
    if strategy == "hybrid":
        kwargs["hybrid_options"] = {"heuristic": opts.args.heuristic, "seed": decoder_seed}
    decode = make_decoder(strategy, prop, em, rng=rng, **kwargs)
    lines = []
    for s in syndromes:
        corr = decode(s)
        rec = corr.record(s)
        rec.pop("diagnostics", None)
        lines.append(json.dumps(rec))
    _write("\n".join(lines) + "\n", opts.get("out", "output"))
    return EXIT_OK


def _grid(opts: Options) -> list[float]:
    a = opts.args
    if a.grid:
        start, stop, num = a.grid.split(":")
        return list(np.linspace(float(start), float(stop), int(num)))
    g = opts.config.get("grid")
    if g is None:
        raise UsageError("need --grid start:stop:num (or a grid block in the config)")
    if "values" in g:
        return [float(v) for v in g["values"]]
    return list(np.linspace(g["start"], g["stop"], g["num"]))


def cmd_sweep(opts: Options) -> int:
    prop = build_propagation_model(opts.code())
    rows = sweep(prop, opts.family(), _grid(opts), strategies=opts.strategies(["mle", "maxent"]),
                 threads=int(opts.get("threads", default=1)))
    _write(format_sweep_csv(rows), opts.get("out", "output"))
    return EXIT_OK


def cmd_threshold(opts: Options) -> int:
    prop = build_propagation_model(opts.code())
    block = opts.config.get("bisection", {})
    tol = opts.args.tol if opts.args.tol is not None else block.get("tol", 1e-6)
    bracket = tuple(opts.args.bracket or block.get("bracket", (0.003, 0.2)))
    family = opts.family()
    lines = []
    for strategy in opts.strategies(["mle", "maxent"]):
        res = threshold_bisection(prop, family, strategy, tol=tol, bracket=bracket,
                                  threads=int(opts.get("threads", default=1)))
        lines.append(json.dumps(res.record()))
    _write("\n".join(lines) + "\n", opts.get("out", "output"))
    return EXIT_OK


def _model_for(opts: Options):
    prop = build_propagation_model(opts.code())
    checks = derive_check_sets(prop)
    em = ErrorModel(opts.rates(), prop.n)
    syndromes = opts.syndromes(prop.r)
    rounds = opts.get("time_rounds")
    if rounds is not None and rounds > 1:
        if len(syndromes) == 1:
            syndromes = syndromes * rounds
        if len(syndromes) != rounds:
            raise UsageError(f"--time-rounds {rounds} needs 1 or {rounds} syndromes, got {len(syndromes)}")
        return build_time_extended(checks, syndromes, em)
    if len(syndromes) != 1:
        raise UsageError("a single-round model takes exactly one syndrome")
    return build_decode_hamiltonian(checks, syndromes[0], em)


def cmd_sample(opts: Options) -> int:
    model = _model_for(opts)
    cfg, extra = opts.sampler(_child_seeds(opts.seed())[1])
    if extra["mode"] == "anneal":
        res = simulated_annealing(model, cfg)
        text = format_samples(res.chain_states, model)
    else:
        text = format_samples(gibbs_sample(model, cfg.temperature, cfg))
    _write(text, opts.get("out", "output"))
    return EXIT_OK


def cmd_export(opts: Options) -> int:
    _write(dumps_model(_model_for(opts)), opts.get("out", "output"))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "decode": cmd_decode,
    "sweep": cmd_sweep,
    "threshold": cmd_threshold,
    "sample": cmd_sample,
    "export": cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON")
    common.add_argument("--code", help="code JSON file or bundled name (513, 933)")
    common.add_argument("--px", type=float)
    common.add_argument("--pz", type=float)
    common.add_argument("--py", type=float)
    common.add_argument("--family", choices=FAMILIES)
    common.add_argument("--p", type=float)
    common.add_argument("--strategy", action="append", choices=STRATEGIES,
                        help="repeatable for sweep/threshold")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--time-rounds", dest="time_rounds", type=int)
    common.add_argument("--syndrome", action="append", help="bit string, 1 = check fired; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cpcising", description="Ising-model decoding of CPC codes")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check a code file")
    p = sub.add_parser("decode", parents=[common], help="decode syndromes to JSON lines")
    p.add_argument("--samples", type=int, help="samples for the sampler strategy")
    p.add_argument("--sweeps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--method", choices=("gibbs", "metropolis"))
    p.add_argument("--heuristic", default="greedy", choices=("greedy", "sa", "bp", "random"))
    p = sub.add_parser("sweep", parents=[common], help="exact logical error rates over a p grid")
    p.add_argument("--grid", help="start:stop:num")
    p = sub.add_parser("threshold", parents=[common], help="bisect for the threshold")
    p.add_argument("--tol", type=float)
    p.add_argument("--bracket", type=float, nargs=2)
    p = sub.add_parser("sample", parents=[common], help="dump sampled configurations")
    p.add_argument("--sweeps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--method", choices=("gibbs", "metropolis"))
    sub.add_parser("export", parents=[common], help="write the Ising model as JSON")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](Options(args))
    except ConventionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVENTION
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except BracketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (CpcError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
