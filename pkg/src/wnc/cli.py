"""Command-line front end.

Scenario files are YAML documents with explicit units in the key names
(bandwidth_hz, lambda_bits_per_slot, ...), schema-validated before any
computation; unknown keys are rejected.  Results are written as CSV tables
with a header row (17 significant digits, lossless round-trip) plus a
sidecar .meta.json capturing inputs, seeds, package version and derived
quantities.  Exit codes: 0 success, 1 validation error, 2 numeric failure,
3 instability/divergence verdicts under --strict.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from . import __version__
from .delay import (ArrivalSpec, delay_constrained_capacity,
                    delay_tail_additive, delay_tail_comonotonic,
                    delay_tail_markov_detail, stability_margin)
from .distributions import DiscreteDistribution
from .errors import (HeavyTailError, NumericFailure, UnstableSystemError,
                     ValidationError)
from .fading import (ChannelSpec, FrequencySelective, Lognormal, Nakagami,
                     Rayleigh, Rice, Weibull, capacity_marginal,
                     certify_light_tail)
from .interference import (HopChain, e2e_delay_bound, feedback_delay_additive,
                           feedback_delay_markov, multihop_service_bound)
from .ordering import SampleSet, adjustment_ordering, cx_order
from .processes import (Additive, AntitheticPairing, Comonotonic,
                        MarkovAdditive, MarkovKernel, additive_cdf_bounds,
                        comonotonic_cdf, frechet_bounds, markov_cdf_bounds)
from .simulate import (SimConfig, cumulative_capacity_samples,
                       empirical_delay_tails, feedback_queue, tandem_queue)

_COMMANDS = ("capacity", "bounds", "delay", "dcc", "order", "interference",
             "simulate", "validate")

_POS = {"type": "number", "exclusiveMinimum": 0}
_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}

_FADING_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["rayleigh", "rice", "nakagami", "weibull",
                          "lognormal", "frequency_selective"]},
        "sigma": _POS, "s": {"type": "number", "minimum": 0}, "sigma0": _POS,
        "m": {"type": "number", "minimum": 0.5}, "omega": _POS,
        "c": _POS, "k": _POS, "mu": _NUM,
        "subchannels": {"type": "array", "minItems": 1},
    },
}

_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["process", "arrival", "sim"],
    "properties": {
        "channel": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "bandwidth_hz": _POS,
                "snr_linear": _POS,
                "fading": _FADING_SCHEMA,
                "capacity_bits_per_slot": {
                    "type": "object", "additionalProperties": False,
                    "required": ["support", "mass"],
                    "properties": {"support": _NUMS, "mass": _NUMS},
                },
            },
        },
        "process": {
            "type": "object", "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["comonotonic", "additive", "markov"]},
                "markov": {
                    "type": "object", "additionalProperties": False,
                    "required": ["states", "transition",
                                 "capacities_bits_per_slot"],
                    "properties": {
                        "states": {"type": "array", "minItems": 1,
                                   "items": {"type": "string"}},
                        "transition": {"type": "array"},
                        "capacities_bits_per_slot": {"type": "array"},
                        "initial": {"type": "string"},
                    },
                },
            },
        },
        "arrival": {
            "type": "object", "additionalProperties": False,
            "required": ["lambda_bits_per_slot"],
            "properties": {"lambda_bits_per_slot": _POS},
        },
        "sim": {
            "type": "object", "additionalProperties": False,
            "required": ["seed", "runs", "horizon_slots"],
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "runs": {"type": "integer", "minimum": 1},
                "horizon_slots": {"type": "integer", "minimum": 1},
                "warmup_slots": {"type": "integer", "minimum": 0},
            },
        },
        "queries": {"type": "array", "items": {"type": "object"}},
    },
}

_QUERY_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(_COMMANDS)},
        "x_grid_bits": _NUMS,
        "theta_grid_per_bit": _NUMS,
        "p_grid": _NUMS,
        "t_slots": {"type": "integer", "minimum": 1},
        "d_slots": {"anyOf": [_NUM, _NUMS]},
        "epsilon": {"type": "number", "exclusiveMinimum": 0,
                    "exclusiveMaximum": 1},
        "probe_t_slots": {"type": "integer", "minimum": 1},
        "hops": {"type": "integer", "minimum": 1},
        "interference_k": {"type": "integer", "minimum": 1},
        "shared_channel": {"type": "boolean"},
        "validate_mc": {"type": "boolean"},
        "certify_x_hi_bits": _POS,
    },
}


def load_scenario(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read scenario: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"scenario is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("scenario must be a mapping")
    import jsonschema
    try:
        jsonschema.validate(doc, _SCHEMA)
        for q in doc.get("queries", []):
            jsonschema.validate(q, _QUERY_SCHEMA)
    except jsonschema.ValidationError as exc:
        path_str = ".".join(str(p) for p in exc.absolute_path) or "(root)"
        raise ValidationError(f"scenario field {path_str}: {exc.message}") from exc
    return doc


# ---------------------------------------------------------------------------
# scenario -> objects


_FADING_KINDS = {
    "rayleigh": (Rayleigh, ("sigma",)),
    "rice": (Rice, ("s", "sigma0")),
    "nakagami": (Nakagami, ("m", "omega")),
    "weibull": (Weibull, ("c", "k")),
    "lognormal": (Lognormal, ("mu", "sigma")),
}


def _build_fading(node: dict):
    kind = node["kind"]
    if kind == "frequency_selective":
        subs = []
        for sub in node["subchannels"]:
            spec = ChannelSpec(sub.get("bandwidth_hz", 1.0),
                               sub.get("snr_linear", 1.0))
            subs.append((spec, _build_fading(sub["fading"])))
        return FrequencySelective(tuple(subs))
    cls, fields = _FADING_KINDS[kind]
    kwargs = {f: node[f] for f in fields if f in node}
    return cls(**kwargs)


def build_marginal(scenario: dict):
    channel = scenario.get("channel")
    if channel is None:
        raise ValidationError("scenario field channel: required for this query")
    if "capacity_bits_per_slot" in channel:
        law = channel["capacity_bits_per_slot"]
        return DiscreteDistribution(np.asarray(law["support"], float),
                                    np.asarray(law["mass"], float))
    if "fading" not in channel:
        raise ValidationError(
            "scenario field channel: needs fading or capacity_bits_per_slot")
    spec = ChannelSpec(channel.get("bandwidth_hz", 1.0),
                       channel.get("snr_linear", 1.0))
    return capacity_marginal(spec, _build_fading(channel["fading"]))


def build_process(scenario: dict):
    node = scenario["process"]
    kind = node["kind"]
    if kind == "markov":
        if "markov" not in node:
            raise ValidationError("scenario field process.markov: required")
        mk = node["markov"]
        kernel = MarkovKernel.from_destination_laws(
            tuple(mk["states"]), np.asarray(mk["transition"], float),
            [float(c) for c in mk["capacities_bits_per_slot"]])
        return MarkovAdditive(kernel, mk.get("initial", "stationary"))
    marginal = build_marginal(scenario)
    return Comonotonic(marginal) if kind == "comonotonic" else Additive(marginal)


def build_sim_config(scenario: dict, seed_override=None) -> SimConfig:
    sim = scenario["sim"]
    seed = sim["seed"] if seed_override is None else seed_override
    return SimConfig(seed=seed, runs=sim["runs"], horizon=sim["horizon_slots"],
                     warmup=sim.get("warmup_slots", -1))


# ---------------------------------------------------------------------------
# query runners (each returns a list of row dicts)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _run_capacity(scenario, query, arrival, config, meta):
    marginal = build_marginal(scenario)
    rows = []
    for x in query.get("x_grid_bits", [0.0, 1.0, 2.0]):
        rows.append({"x_bits": float(x), "cdf": float(marginal.cdf(x)),
                     "tail": float(marginal.tail(x))})
    for p in query.get("p_grid", []):
        rows.append({"quantile_p": float(p),
                     "quantile_bits": marginal.quantile(float(p))})
    for th in query.get("theta_grid_per_bit", []):
        rows.append({"theta_per_bit": float(th), "cgf": marginal.cgf(float(th))})
    if "certify_x_hi_bits" in query:
        cert = certify_light_tail_from_marginal(scenario, query)
        rows.append({"certificate_a": cert.prefactor_a,
                     "certificate_b": cert.rate_b,
                     "certificate_violation": cert.max_violation})
    return rows


def certify_light_tail_from_marginal(scenario, query):
    channel = scenario["channel"]
    spec = ChannelSpec(channel.get("bandwidth_hz", 1.0),
                       channel.get("snr_linear", 1.0))
    model = _build_fading(channel["fading"])
    return certify_light_tail(spec, model, 0.0, query["certify_x_hi_bits"])


def _run_bounds(scenario, query, arrival, config, meta):
    process = build_process(scenario)
    t = query.get("t_slots", 10)
    rows = []
    for x in query.get("x_grid_bits", [1.0]):
        x = float(x)
        row = {"t_slots": t, "x_bits": x}
        if isinstance(process, Comonotonic):
            v = comonotonic_cdf(process, t, x)
            row.update(cdf_lower=v, cdf_upper=v, theta_lower=None,
                       theta_upper=None)
        else:
            bound_fn = (markov_cdf_bounds if isinstance(process, MarkovAdditive)
                        else additive_cdf_bounds)
            lo, up = bound_fn(process, t, x)
            row.update(cdf_lower=lo.value, cdf_upper=up.value,
                       theta_lower=lo.theta_star, theta_upper=up.theta_star,
                       prefactor_lower=lo.prefactor, prefactor_upper=up.prefactor)
        if not isinstance(process, MarkovAdditive) and t <= 8:
            marginal = process.marginal
            f_lo, f_up = frechet_bounds([marginal] * t, x)
            row.update(frechet_lower=f_lo, frechet_upper=f_up)
        rows.append(row)
    return rows


def _run_delay(scenario, query, arrival, config, meta):
    process = build_process(scenario)
    rows = []
    d_values = query.get("d_slots", [1, 2, 5, 10])
    mc = (empirical_delay_tails(process, arrival, d_values, config)
          if query.get("validate_mc") else None)
    for i, d in enumerate(d_values):
        d = float(d)
        row = {"d_slots": d}
        if isinstance(process, Comonotonic):
            row.update(delay_lower=None,
                       delay_upper=delay_tail_comonotonic(process, arrival, d),
                       theta_star=None, prefactor=None, horizon=math.inf)
        elif isinstance(process, MarkovAdditive):
            detail = delay_tail_markov_detail(process, arrival, d)
            row.update(delay_lower=detail.lower.value,
                       delay_upper=detail.upper.value,
                       theta_star=detail.theta_star,
                       prefactor=detail.upper.prefactor,
                       basic_upper=detail.basic_upper.value,
                       horizon=detail.upper.horizon)
        else:
            lo, up = delay_tail_additive(process, arrival, d)
            row.update(delay_lower=lo.value, delay_upper=up.value,
                       theta_star=up.theta_star, prefactor=up.prefactor,
                       horizon=up.horizon)
        if mc is not None:
            row.update(mc_estimate=mc[i].point, mc_stderr=mc[i].stderr)
        rows.append(row)
    meta["stability_margin"] = stability_margin(process, arrival)
    return rows


def _run_dcc(scenario, query, arrival, config, meta):
    process = build_process(scenario)
    d = query.get("d_slots", 10)
    d = float(d[0] if isinstance(d, (list, tuple)) else d)
    eps = float(query.get("epsilon", 1e-3))
    res = delay_constrained_capacity(process, d, eps)
    return [{"d_slots": d, "epsilon": eps,
             "lambda_conservative": res.conservative,
             "lambda_optimistic": res.optimistic,
             "one_shot_lower": res.one_shot_window[0],
             "one_shot_upper": res.one_shot_window[1],
             "feasible": res.feasible}]


def _run_order(scenario, query, arrival, config, meta):
    marginal = build_marginal(scenario)
    proc_n = AntitheticPairing(marginal)
    proc_perp = Additive(marginal)
    proc_p = Comonotonic(marginal)
    probe_t = query.get("probe_t_slots", 16)
    runs = min(config.runs, 200_000)
    sn = SampleSet(cumulative_capacity_samples(proc_n, probe_t, runs,
                                               config.seed), "S_N")
    sp = SampleSet(cumulative_capacity_samples(proc_perp, probe_t, runs,
                                               config.seed + 1), "S_perp")
    sc = SampleSet(cumulative_capacity_samples(proc_p, probe_t, runs,
                                               config.seed + 2), "S_P")
    v1 = cx_order(sn, sp)
    v2 = cx_order(sp, sc)
    adj = adjustment_ordering(proc_perp, proc_p, arrival, probe_t,
                              runs, config.seed)
    meta["order_verdicts"] = {
        "cx_N_perp": v1.holds, "cx_perp_P": v2.holds,
        "theta_independent": adj.theta_a, "theta_comonotonic": adj.theta_b,
        "adjustment_consistent": adj.consistent}
    rows = [{"relation": "cx(S_N, S_perp)", "holds": v1.holds,
             "max_violation": v1.max_violation, "tolerance": v1.tolerance_used},
            {"relation": "cx(S_perp, S_P)", "holds": v2.holds,
             "max_violation": v2.max_violation, "tolerance": v2.tolerance_used}]
    d_values = query.get("d_slots")
    if d_values:
        cfgs = [SimConfig(config.seed + k, config.runs, config.horizon,
                          config.warmup) for k in range(3)]
        tails = [empirical_delay_tails(p, arrival, d_values, c, strict=True)
                 for p, c in zip((proc_n, proc_perp, proc_p), cfgs)]
        for i, d in enumerate(d_values):
            rows.append({"relation": f"delay_chain_d={d:g}",
                         "tail_negative": tails[0][i].point,
                         "tail_independent": tails[1][i].point,
                         "tail_comonotonic": tails[2][i].point})
    return rows


def _run_interference(scenario, query, arrival, config, meta):
    process = build_process(scenario)
    d_values = query.get("d_slots", [1, 2, 5])
    rows = []
    for d in d_values:
        d = float(d)
        row = {"d_slots": d}
        try:
            if isinstance(process, MarkovAdditive):
                rep = feedback_delay_markov(process, arrival, d)
                rep_impr = feedback_delay_markov(process, arrival, d,
                                                 improved=True)
            else:
                rep = feedback_delay_additive(process, arrival, d)
                rep_impr = feedback_delay_additive(process, arrival, d,
                                                   improved=True)
            row.update(feedback_upper=rep.value, theta_star=rep.theta_star,
                       prefactor=rep.prefactor, horizon=rep.horizon,
                       feedback_upper_improved=rep_impr.value)
        except UnstableSystemError as exc:
            row.update(feedback_upper=None, error=str(exc))
            meta.setdefault("verdicts", []).append(str(exc))
        rows.append(row)
    n_hops = query.get("hops", 1)
    k = query.get("interference_k", 1)
    shared = query.get("shared_channel", False)
    if isinstance(process, Additive) and n_hops >= 1:
        chain = HopChain((process,) * n_hops, k, shared)
        svc = multihop_service_bound(chain, arrival)
        meta["multihop_multiplier"] = svc.multiplier
        for d in d_values:
            rep = e2e_delay_bound(chain, arrival, float(d))
            row = {"d_slots": float(d), "e2e_upper": rep.value,
                   "e2e_theta": rep.theta_star, "hops": n_hops,
                   "interference_k": k}
            if "diverges" in rep.notes:
                row["error"] = rep.notes
                meta.setdefault("verdicts", []).append(rep.notes)
            rows.append(row)
        if query.get("validate_mc"):
            ests = tandem_queue(chain, arrival, config, d_values)
            for row, est in zip(rows[-len(d_values):], ests):
                row.update(mc_estimate=est.point, mc_stderr=est.stderr)
    return rows


def _run_simulate(scenario, query, arrival, config, meta):
    process = build_process(scenario)
    d_values = query.get("d_slots", [1, 2, 5, 10])
    ests = empirical_delay_tails(process, arrival, d_values, config)
    return [{"d_slots": float(d), "mc_estimate": e.point, "mc_stderr": e.stderr,
             "runs": e.runs_used}
            for d, e in zip(d_values, ests)]


def _run_validate(scenario, query, arrival, config, meta):
    """Bound-vs-Monte-Carlo matrix with one pass/fail row per check."""
    process = build_process(scenario)
    rows = []
    d_values = query.get("d_slots", [1, 2, 5, 10])

    def slack(est, bound):
        # binomial noise evaluated at the bound, never degenerate at p_hat = 0
        b = min(max(bound, 0.0), 1.0) if bound is not None else 0.0
        se_b = math.sqrt(b * (1.0 - b) / est.runs_used)
        return 3.0 * max(est.stderr, se_b) + 1e-12

    def check(name, parameter, lower, upper, est):
        ok = (lower is None or est.point >= lower - slack(est, lower)) and \
             (upper is None or est.point <= upper + slack(est, upper))
        rows.append({"check": name, "parameter": parameter,
                     "lower": lower, "upper": upper,
                     "estimate": est.point, "stderr": est.stderr,
                     "pass": bool(ok)})
        return ok

    if isinstance(process, Comonotonic):
        ests = empirical_delay_tails(process, arrival, d_values, config)
        for d, est in zip(d_values, ests):
            # the truncated-sup event equals the finite-horizon closed form
            v_t = delay_tail_comonotonic(process, arrival, float(d),
                                         horizon_t=config.window)
            v_inf = delay_tail_comonotonic(process, arrival, float(d))
            check("comonotonic_delay", f"d={d:g}", v_t, min(v_t, v_inf), est)
    elif isinstance(process, MarkovAdditive):
        ests = empirical_delay_tails(process, arrival, d_values, config)
        for d, est in zip(d_values, ests):
            detail = delay_tail_markov_detail(process, arrival, float(d))
            check("markov_delay", f"d={d:g}", detail.lower.value,
                  detail.upper.value, est)
    else:
        ests = empirical_delay_tails(process, arrival, d_values, config)
        for d, est in zip(d_values, ests):
            lo, up = delay_tail_additive(process, arrival, float(d))
            check("additive_delay", f"d={d:g}", lo.value, up.value, est)
        t = query.get("t_slots", 10)
        xs = query.get("x_grid_bits") or [
            0.6 * t * arrival.lam, t * arrival.lam, 1.4 * t * arrival.lam]
        samples = cumulative_capacity_samples(process, t, config.runs,
                                              config.seed + 7)
        for x in xs:
            lo, up = additive_cdf_bounds(process, t, float(x))
            p = float(np.mean(samples <= float(x)))
            est = type(ests[0])(p, math.sqrt(p * (1 - p) / config.runs),
                                config.runs)
            check("additive_cdf", f"t={t},x={x:g}", lo.value, up.value, est)
        if stability_margin(process, ArrivalSpec(2 * arrival.lam),) > 0:
            fb = feedback_queue(process, arrival, config, d_values)
            for d, est in zip(d_values, fb):
                rep = feedback_delay_additive(process, arrival, float(d))
                check("feedback_delay", f"d={d:g}", None, rep.value, est)
    meta["all_pass"] = all(r["pass"] for r in rows)
    return rows


_RUNNERS = {
    "capacity": _run_capacity, "bounds": _run_bounds, "delay": _run_delay,
    "dcc": _run_dcc, "order": _run_order, "interference": _run_interference,
    "simulate": _run_simulate, "validate": _run_validate,
}


# ---------------------------------------------------------------------------
# output assembly


def _rows_to_csv(rows) -> str:
    headers = []
    for _, row in rows:
        for key in row:
            if key not in headers:
                headers.append(key)
    buf = io.StringIO()
    buf.write(",".join(["query_index"] + headers) + "\n")
    for idx, row in rows:
        cells = [str(idx)] + [_fmt(row.get(h)) for h in headers]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def _rows_to_json(rows) -> str:
    payload = [{"query_index": idx, **row} for idx, row in rows]
    return json.dumps(payload, indent=2, sort_keys=True,
                      allow_nan=True, default=str) + "\n"


def run_command(command: str, scenario: dict, seed_override=None,
                threads: int = 1):
    arrival = ArrivalSpec(scenario["arrival"]["lambda_bits_per_slot"])
    config = build_sim_config(scenario, seed_override)
    queries = [q for q in scenario.get("queries", []) if q["kind"] == command]
    if not queries:
        queries = [{"kind": command}]
    meta = {"command": command, "seed": config.seed,
            "package": f"wnc {__version__}",
            "lambda_bits_per_slot": arrival.lam}
    runner = _RUNNERS[command]

    def run_one(indexed):
        idx, query = indexed
        local_meta = {}
        out = runner(scenario, query, arrival, config, local_meta)
        return idx, out, local_meta

    indexed = list(enumerate(queries))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, indexed))
    else:
        results = [run_one(item) for item in indexed]
    results.sort(key=lambda r: r[0])
    rows = []
    for idx, out, local_meta in results:
        for row in out:
            rows.append((idx, row))
        for key, val in local_meta.items():
            meta[f"q{idx}_{key}"] = val
    return rows, meta


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wnc",
        description="Wireless channel capacity bounds and their MC validation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--strict", action="store_true")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("WNC_THREADS", "1")))
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    args = parser.parse_args(argv)

    try:
        scenario = load_scenario(args.scenario)
        rows, meta = run_command(args.command, scenario,
                                 seed_override=args.seed,
                                 threads=max(args.threads, 1))
        text = (_rows_to_csv(rows) if args.format == "csv"
                else _rows_to_json(rows))
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
            meta_doc = {"scenario": scenario, **meta}
            with open(args.out + ".meta.json", "w") as fh:
                json.dump(meta_doc, fh, indent=2, sort_keys=True, default=str)
                fh.write("\n")
        else:
            sys.stdout.write(text)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except (NumericFailure, HeavyTailError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except UnstableSystemError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return 3 if args.strict else 0

    if args.strict:
        verdicts = [v for k, v in meta.items() if k.endswith("verdicts")]
        if any(verdicts):
            print(f"strict: {verdicts}", file=sys.stderr)
            return 3
        if meta.get("all_pass") is False or any(
                k.endswith("all_pass") and v is False for k, v in meta.items()):
            print("strict: validation checks failed", file=sys.stderr)
            return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
