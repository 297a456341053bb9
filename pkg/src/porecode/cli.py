"""Command-line front end.

Every subcommand reads a JSON config file, applies the override flags, and
writes deterministic artifacts: parameter JSON, CSV tables with the run seed
and a 12-hex config hash on every row, and ACGT text files in the two-column
`id sequence` format shared by all commands. Re-running a command with the
same effective config reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys

import numpy as np

from . import ldpc
from .air import AirConfig, bcjr_once_rate, iid_baseline_params
from .channel import (ChannelParams, PositionClass, as_seq, seq_to_str,
                      transmit, validate)
from .convcode import ConvCodeSpec, encode_block
from .estimate import estimate_with_stats, ingest
from .fer import FerConfig, FerRunner, run_fer
from .trellis import (BlockStructure, DecodeError, DriftWindow, app_single,
                      combine_separate, default_drift_window)


class ConfigError(ValueError):
    pass


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def config_hash(cfg: dict) -> str:
    """Hash of the effective (post-override) config, 12 hex chars."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_seqfile(path, items) -> None:
    """items: iterable of (id, symbol array)."""
    with open(path, "w") as fh:
        for sid, seq in items:
            fh.write(f"{sid} {seq_to_str(np.asarray(seq))}\n")


def _read_grouped(path):
    """Parse an `id sequence` file keeping one group per id, in file order."""
    order = []
    groups = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'id sequence'")
            sid, seq = parts
            if sid not in groups:
                groups[sid] = []
                order.append(sid)
            try:
                groups[sid].append(as_seq(seq))
            except ValueError as e:
                raise ConfigError(f"{path}:{lineno}: {e}") from None
    if not order:
        raise ConfigError(f"{path}: no sequences")
    return order, groups


def _load_params(path) -> ChannelParams:
    try:
        params = ChannelParams.load(path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        raise ConfigError(f"cannot load channel params {path}: {e}") from None
    problems = validate(params)
    if problems:
        raise ConfigError(f"{path}: invalid parameters: {problems[0]}")
    return params


def _ss(seed, *key):
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


# -- estimate ----------------------------------------------------------------

def cmd_estimate(cfg: dict) -> int:
    data = ingest(_need(cfg, "refs"), _need(cfg, "reads"))
    ks = cfg.get("k", 1)
    if isinstance(ks, int):
        ks = [ks]
    out = _need(cfg, "out")
    if len(ks) > 1 and "{k}" not in out:
        raise ConfigError("multiple k values need a '{k}' placeholder in out")
    l_max = int(cfg.get("l_max", 2))
    seed = int(cfg.get("seed", 0))
    chash = config_hash(cfg)
    summary = {"config_hash": chash, "seed": seed, "per_k": {}}
    for k in ks:
        params, counts, stats = estimate_with_stats(
            data, int(k), l_max, rng_seed=seed,
            single_ins=cfg.get("single_ins", "clamp"),
            epsilon=float(cfg.get("epsilon", 1e-6)))
        path = out.replace("{k}", str(k))
        params.save(path)
        mid_rows = counts.event_counts[PositionClass.MIDDLE]
        seen = int((mid_rows.sum(axis=-1) > 0).any(axis=-1).sum())
        summary["per_k"][str(k)] = {
            "params_file": path,
            "n_refs": stats.n_refs,
            "n_reads": stats.n_reads,
            "n_positions": stats.n_positions,
            "mean_edit_distance": stats.mean_edit_distance,
            "middle_contexts_seen": seen,
            "middle_contexts_total": int(mid_rows.shape[0]),
            "fallback_event_rows": stats.fallback_event_rows,
            "fallback_ins_rows": stats.fallback_ins_rows,
            "fallback_sub_rows": stats.fallback_sub_rows,
        }
    if cfg.get("summary_out"):
        with open(cfg["summary_out"], "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(json.dumps(summary, sort_keys=True))
    return 0


# -- simulate ----------------------------------------------------------------

def cmd_simulate(cfg: dict) -> int:
    params = _load_params(_need(cfg, "params"))
    seed = int(cfg.get("seed", 0))
    m_reads = int(cfg.get("m_reads", 1))
    if m_reads < 1:
        raise ConfigError("m_reads must be >= 1")
    refs_cfg = _need(cfg, "refs")
    if isinstance(refs_cfg, str):
        order, groups = _read_grouped(refs_cfg)
        refs = [(sid, groups[sid][0]) for sid in order]
    else:
        n = int(_need(refs_cfg, "num_sequences"))
        length = int(_need(refs_cfg, "length"))
        refs = []
        for l in range(n):
            rng = np.random.default_rng(_ss(seed, l, 0))
            refs.append((f"s{l}", rng.integers(0, 4, size=length)))
        if refs_cfg.get("refs_out"):
            _write_seqfile(refs_cfg["refs_out"], refs)
    lines = []
    for l, (sid, x) in enumerate(refs):
        x = np.asarray(x, dtype=np.int8)
        for j in range(m_reads):
            y, _ = transmit(x, params, rng_seed=_ss(seed, l, 1, j))
            lines.append((sid, y))
    _write_seqfile(_need(cfg, "out"), lines)
    print(json.dumps({"refs": len(refs), "reads": len(lines),
                      "seed": seed, "config_hash": config_hash(cfg)}))
    return 0


# -- encode / decode ---------------------------------------------------------

def _outer_code(outer_cfg: dict):
    pg, _ = ldpc.table1(int(_need(outer_cfg, "m")))
    return ldpc.lift(pg, int(_need(outer_cfg, "z")),
                     rng_seed=int(outer_cfg.get("seed", 0)))


def _frame_runner(cfg: dict, params: ChannelParams) -> FerRunner:
    outer = _need(cfg, "outer")
    fc = FerConfig(channel_params=params,
                   protograph_m=int(_need(outer, "m")),
                   lift_z=int(_need(outer, "z")),
                   lift_seed=int(outer.get("seed", 0)),
                   m_reads=int(cfg.get("m_reads", 1)),
                   inner=ConvCodeSpec(
                       offset_seed=int(cfg.get("offset_seed", 0))),
                   block_payload_bits=int(cfg.get("block_payload_bits", 162)),
                   rng_seed=int(cfg.get("seed", 0)),
                   window=_window_override(cfg))
    return FerRunner(fc)


def _window_override(cfg: dict):
    if cfg.get("window_half") is None:
        return None
    h = int(cfg["window_half"])
    if h < 0:
        raise ConfigError("window_half must be >= 0")
    return DriftWindow(-h, h)


def _parse_bits(text: str, where: str) -> np.ndarray:
    if not text or set(text) - {"0", "1"}:
        raise ConfigError(f"{where}: payload lines must be over 0/1")
    return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")


def cmd_encode(cfg: dict) -> int:
    seed = int(cfg.get("seed", 0))
    if cfg.get("outer") is not None:
        runner = _frame_runner(cfg, ChannelParams.uniform(1, 2))
        if cfg.get("pc_out"):
            ldpc.save_parity_check(cfg["pc_out"], runner.pc)
        pay_cfg = _need(cfg, "payload")
        if isinstance(pay_cfg, str):
            with open(pay_cfg) as fh:
                payloads = [_parse_bits(line.strip(), f"{pay_cfg}:{i+1}")
                            for i, line in enumerate(fh) if line.strip()]
            for i, p in enumerate(payloads):
                if p.shape[0] != runner.k_info:
                    raise ConfigError(
                        f"{pay_cfg}: frame {i} has {p.shape[0]} bits, "
                        f"code dimension is {runner.k_info}")
        else:
            nf = int(_need(pay_cfg, "num_frames"))
            payloads = [np.random.default_rng(_ss(seed, f, 0)).integers(
                0, 2, size=runner.k_info).astype(np.uint8)
                for f in range(nf)]
        lines = []
        pay_lines = []
        for f, payload in enumerate(payloads):
            _, strands = runner.encode_frame(payload)
            pay_lines.append("".join(str(int(b)) for b in payload))
            for b, x in enumerate(strands):
                lines.append((f"f{f}_b{b}", x))
        _write_seqfile(_need(cfg, "out"), lines)
        if cfg.get("payload_out"):
            with open(cfg["payload_out"], "w") as fh:
                fh.write("\n".join(pay_lines) + "\n")
        info = {"frames": len(payloads), "blocks_per_frame": runner.plan.s,
                "payload_bits": runner.k_info,
                "codeword_bits": runner.pc.n}
    else:
        # no outer code: every payload line becomes one inner block
        spec = ConvCodeSpec(offset_seed=int(cfg.get("offset_seed", 0)))
        with open(_need(cfg, "payload")) as fh:
            payloads = [_parse_bits(line.strip(), f"payload:{i+1}")
                        for i, line in enumerate(fh) if line.strip()]
        lines = []
        for i, bits in enumerate(payloads):
            pad = (3 - bits.shape[0] % 3) % 3
            bits = np.concatenate([bits, np.zeros(pad, dtype=bits.dtype)])
            lines.append((f"b{i}", encode_block(bits.astype(np.int64), spec)))
        _write_seqfile(_need(cfg, "out"), lines)
        info = {"blocks": len(lines)}
    info.update({"seed": seed, "config_hash": config_hash(cfg)})
    print(json.dumps(info))
    return 0


def _group_apps(reads, structure, params, priors, window, skips):
    """Posteriors per usable read; reads outside the window are skipped."""
    apps = []
    for y in reads:
        try:
            apps.append(app_single(y, structure, params, priors=priors,
                                   window=window))
        except DecodeError:
            skips["reads_skipped"] += 1
    norm = priors / priors.sum(axis=1, keepdims=True)
    if not apps:
        skips["dead_groups"] += 1
        return norm
    # pinned prior entries (known pad bits) have zero posterior mass in
    # every read, so flooring the denominator keeps them pinned
    return combine_separate(apps, np.maximum(norm, 1e-12))


def cmd_decode(cfg: dict) -> int:
    params = _load_params(_need(cfg, "params"))
    order, groups = _read_grouped(_need(cfg, "reads"))
    chash = config_hash(cfg)
    app_rows = []
    skips = {"reads_skipped": 0, "dead_groups": 0}
    if cfg.get("outer") is not None:
        runner = _frame_runner(cfg, params)
        s = runner.plan.s
        if len(order) % s:
            raise ConfigError(f"{len(order)} read groups do not split into "
                              f"frames of {s} blocks")
        decoded = []
        ranges = runner.plan.bit_ranges()
        for f in range(len(order) // s):
            outer_llr = np.zeros(runner.pc.n)
            for b in range(s):
                gid = order[f * s + b]
                comb = _group_apps(groups[gid], runner.structures[b], params,
                                   runner.priors[b], runner.windows[b], skips)
                lo, hi = ranges[b]
                with np.errstate(divide="ignore"):
                    lg = np.log(np.maximum(comb, 1e-300))
                outer_llr[lo:hi] = lg[:hi - lo, 0] - lg[:hi - lo, 1]
                for v in range(comb.shape[0]):
                    app_rows.append([gid, v] + [f"{p:.17g}" for p in comb[v]]
                                    + [int(cfg.get("seed", 0)), chash])
            hard, converged, iters = ldpc.ldpc_decode(outer_llr, runner.pc)
            enc = ldpc._encoder_of(runner.pc)
            bits = "".join(str(int(v)) for v in hard[enc["info_cols"]])
            decoded.append((f"f{f}", bits, converged, iters))
        with open(_need(cfg, "out"), "w") as fh:
            for fid, bits, conv, iters in decoded:
                fh.write(f"{fid} {bits}\n")
        info = {"frames": len(decoded),
                "bp_converged": sum(int(c) for _, _, c, _ in decoded)}
    else:
        n_bits = int(cfg.get("payload_bits", 162))
        pad = (3 - n_bits % 3) % 3
        structure = BlockStructure.coded_block(
            n_bits + pad,
            ConvCodeSpec(offset_seed=int(cfg.get("offset_seed", 0))))
        priors = np.full((n_bits + pad, 2), 0.5)
        if pad:
            priors[n_bits:] = [1.0, 0.0]
        window = _window_override(cfg)
        if window is None:
            window = default_drift_window(structure.n_sections, params)
        decoded = []
        for gid in order:
            comb = _group_apps(groups[gid], structure, params, priors,
                               window, skips)
            bits = "".join(str(int(v))
                           for v in comb[:n_bits].argmax(axis=1))
            decoded.append((gid, bits))
            for v in range(comb.shape[0]):
                app_rows.append([gid, v] + [f"{p:.17g}" for p in comb[v]]
                                + [int(cfg.get("seed", 0)), chash])
        with open(_need(cfg, "out"), "w") as fh:
            for gid, bits in decoded:
                fh.write(f"{gid} {bits}\n")
        info = {"blocks": len(decoded)}
    if cfg.get("app_out"):
        width = len(app_rows[0]) - 4 if app_rows else 2
        header = (["block", "index"] + [f"p{a}" for a in range(width)]
                  + ["seed", "config_hash"])
        _write_csv(cfg["app_out"], header, app_rows)
    info.update(skips)
    info.update({"seed": int(cfg.get("seed", 0)), "config_hash": chash})
    print(json.dumps(info))
    return 0


# -- air ---------------------------------------------------------------------

def _decoder_entries(cfg: dict, channel: ChannelParams | None):
    entries = cfg.get("decoders")
    if not entries:
        return [("matched", None)]
    out = []
    for e in entries:
        if isinstance(e, str):
            e = {"name": e, "params": e}
        name = e.get("name", e.get("params", "decoder"))
        if e.get("collapse_iid"):
            base = _load_params(e["params"]) if e.get("params") else channel
            if base is None:
                raise ConfigError("collapse_iid needs params or a model "
                                  "channel to collapse")
            out.append((name, iid_baseline_params(base)))
        else:
            out.append((name, _load_params(_need(e, "params"))))
    return out


def cmd_air(cfg: dict) -> int:
    seed = int(cfg.get("seed", 0))
    chash = config_hash(cfg)
    source = cfg.get("source", "model")
    records = None
    channel = None
    if source == "model":
        channel = _load_params(_need(cfg, "channel_params"))
    elif source == "dataset":
        ds = _need(cfg, "dataset")
        records = ingest(_need(ds, "refs"), _need(ds, "reads"))
    else:
        raise ConfigError("source must be 'model' or 'dataset'")
    m_list = cfg.get("m_list", [1])
    if isinstance(m_list, int):
        m_list = [m_list]
    inner = ConvCodeSpec() if cfg.get("coded", False) else None
    decoders = _decoder_entries(cfg, channel)
    if cfg.get("k") is not None:
        wanted = int(cfg["k"])
        kept = [(n, p) for n, p in decoders
                if (p.k if p is not None else
                    (channel.k if channel else None)) == wanted]
        if not kept:
            raise ConfigError(f"no configured decoder has k={wanted}")
        decoders = kept
    rows = []
    for name, dec in decoders:
        for m in m_list:
            base = dict(source=source, m_reads=int(m), inner=inner,
                        decoder_params=dec, rng_seed=seed,
                        num_sequences=int(cfg.get("num_sequences", 100)))
            try:
                if source == "model":
                    air_cfg = AirConfig(
                        channel_params=channel,
                        n_symbols=int(cfg.get("n_symbols", 110)),
                        payload_bits=int(cfg.get("payload_bits", 162)),
                        **base)
                else:
                    air_cfg = AirConfig(records=records, **base)
                res = bcjr_once_rate(air_cfg)
                rows.append([source, name, int(m),
                             "coded" if inner else "uncoded",
                             f"{res.rate:.10g}", f"{res.stderr:.10g}",
                             res.n_used, res.skipped_window,
                             res.skipped_infeasible, res.skipped_short,
                             seed, chash, "ok", ""])
            except (ValueError, ConfigError) as e:
                rows.append([source, name, int(m),
                             "coded" if inner else "uncoded",
                             "", "", 0, 0, 0, 0, seed, chash,
                             "error", str(e)])
    header = ["source", "decoder", "m_reads", "mode", "rate", "stderr",
              "n_used", "skipped_window", "skipped_infeasible",
              "skipped_short", "seed", "config_hash", "status", "error"]
    _write_csv(_need(cfg, "out"), header, rows)
    bad = sum(1 for r in rows if r[-2] == "error")
    print(json.dumps({"rows": len(rows), "errors": bad, "seed": seed,
                      "config_hash": chash}))
    return 0


# -- fer ---------------------------------------------------------------------

def cmd_fer(cfg: dict) -> int:
    seed = int(cfg.get("seed", 0))
    chash = config_hash(cfg)
    channel = _load_params(_need(cfg, "channel_params"))
    decoder = (_load_params(cfg["decoder_params"])
               if cfg.get("decoder_params") else None)
    m_list = cfg.get("m_list", [1])
    if isinstance(m_list, int):
        m_list = [m_list]
    outer = _need(cfg, "outer")
    rows = []
    for m in m_list:
        fc = FerConfig(channel_params=channel, decoder_params=decoder,
                       protograph_m=int(_need(outer, "m")),
                       lift_z=int(_need(outer, "z")),
                       lift_seed=int(outer.get("seed", 0)),
                       m_reads=int(m),
                       block_payload_bits=int(
                           cfg.get("block_payload_bits", 162)),
                       target_errors=int(cfg.get("target_errors", 100)),
                       max_frames=int(cfg.get("max_frames", 1000)),
                       rng_seed=seed,
                       window=_window_override(cfg),
                       bp_iters=int(cfg.get("bp_iters", ldpc.BP_MAX_ITERS)))
        res = run_fer(fc)
        rows.append([int(m), res.frames, res.frame_errors,
                     f"{res.fer:.10g}", f"{res.ci_low:.10g}",
                     f"{res.ci_high:.10g}", res.window_violations,
                     res.infeasible_reads, res.dead_blocks,
                     res.bp_nonconverged, res.payload_bits,
                     res.codeword_bits, seed, chash])
    header = ["m_reads", "frames", "frame_errors", "fer", "ci_low",
              "ci_high", "window_violations", "infeasible_reads",
              "dead_blocks", "bp_nonconverged", "payload_bits",
              "codeword_bits", "seed", "config_hash"]
    _write_csv(_need(cfg, "out"), header, rows)
    print(json.dumps({"rows": len(rows), "seed": seed,
                      "config_hash": chash}))
    return 0


# -- entry point -------------------------------------------------------------

_COMMANDS = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "air": cmd_air,
    "fer": cmd_fer,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="porecode",
        description="Simulation, estimation, decoding and rate analysis "
                    "for a memory-k insertion/deletion/substitution channel.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        sp.add_argument("config", help="JSON config file")
        sp.add_argument("--k", type=int, default=None,
                        help="override the memory length / decoder choice")
        sp.add_argument("--m-reads", type=int, default=None,
                        help="override the number of reads per sequence")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
        sp.add_argument("--out", default=None,
                        help="override the primary output path")
    return p


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.k is not None:
        cfg["k"] = args.k
    if args.m_reads is not None:
        cfg["m_reads"] = args.m_reads
        if "m_list" in cfg or args.command in ("air", "fer"):
            cfg["m_list"] = [args.m_reads]
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(_load_config(args.config), args)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, ValueError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
