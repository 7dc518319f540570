"""Command-line entry point: ``adaptfec <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import socket
import sys
from pathlib import Path

from . import blockcode, channel, harness, transport
from .blockcode import CodeParams, capacity


def _params(parser: argparse.ArgumentParser, T: int, B: int, N: int) -> CodeParams:
    if T > blockcode.MAX_T:
        parser.error(f"T={T} exceeds the supported maximum {blockcode.MAX_T}")
    try:
        return CodeParams(T, B, N)
    except ValueError as exc:
        parser.error(str(exc))


def cmd_gen_code(args, parser) -> int:
    params = _params(parser, args.T, args.B, args.N)
    if args.search:
        code, stats = blockcode.search_code(params, args.seed)
        print(f"searched {params}: {stats.draws} draws, {stats.moves} moves", file=sys.stderr)
    else:
        code = blockcode.construct_code(params, args.seed)
    text = blockcode.format_code_table([code])
    if args.out:
        path = Path(args.out)
        if args.append and path.exists():
            text = path.read_text() + text
        path.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify_code(args, parser) -> int:
    try:
        codes = blockcode.read_code_table(args.table, verify=False)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ok = True
    for code in codes:
        report = blockcode.verify_block_code(code, exhaustive=args.exhaustive)
        if report:
            print(f"{code.params} pass rate {capacity(code.params)}")
        else:
            ok = False
            bits = "".join(map(str, report.pattern))
            print(f"{code.params} FAIL pattern {bits} symbol {report.symbol}")
    return 0 if ok else 1


def cmd_gen_trace(args, parser) -> int:
    try:
        cfg = channel.FritchmanConfig(args.M, args.alpha, args.beta, args.epsilon, args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    trace = channel.generate_trace(cfg, args.len, args.phases)
    if args.out:
        channel.write_trace(args.out, trace)
    else:
        sys.stdout.write(channel.format_trace(trace))
    if args.histogram:
        Path(args.histogram).write_text(channel.format_histogram(channel.burst_histogram(trace)))
    return 0


def cmd_run(args, parser) -> int:
    if args.strategy == "fixed":
        if args.B is None or args.N is None:
            parser.error("--strategy fixed needs --B and --N")
        _params(parser, args.T, args.B, args.N)
    try:
        cfg = harness.ExperimentConfig(
            args.strategy, args.T, args.L, args.sessions, args.frame_bytes, args.B, args.N
        )
    except harness.ConfigError as exc:
        parser.error(str(exc))
    try:
        trace = channel.read_trace(args.trace)
    except (OSError, channel.TraceParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        result = harness.run_experiment(cfg, trace)
    except harness.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv = result.to_csv()
    if args.out_csv:
        Path(args.out_csv).write_text(csv)
    else:
        sys.stdout.write(csv)
    return 0


def cmd_send(args, parser) -> int:
    try:
        peer = transport.parse_addr(args.peer)
    except ValueError as exc:
        parser.error(str(exc))
    if args.input:
        frames = transport.frames_from_bytes(Path(args.input).read_bytes(), args.frame_bytes)
        if args.frames is not None:
            frames = frames[: args.frames]
    else:
        if args.frames is None:
            parser.error("send needs --input or --frames")
        frames = transport.random_frames(args.frames, args.frame_bytes, args.seed)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    if args.bind:
        sock.bind(transport.parse_addr(args.bind))
    stats = transport.run_sender(frames, peer, args.T, args.tick_ms, sock=sock)
    sock.close()
    print(
        f"sent {stats.sent} packets, {stats.feedback} feedback, "
        f"payload {stats.payload_bytes} B, wire {stats.wire_bytes} B",
        file=sys.stderr,
    )
    return 0


def cmd_recv(args, parser) -> int:
    try:
        addr = transport.parse_addr(args.bind)
    except ValueError as exc:
        parser.error(str(exc))
    drop = None
    if args.drop_trace:
        try:
            drop = channel.read_trace(args.drop_trace)
        except (OSError, channel.TraceParseError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sock.bind(addr)
    if args.ready_file:
        Path(args.ready_file).write_text(f"{sock.getsockname()[1]}\n")
    res = transport.run_receiver(
        sock, args.T, args.L, drop, args.frames, args.idle_timeout, args.tick_ms
    )
    sock.close()
    count = args.frames if args.frames is not None else len(res.frames)
    lost = res.lost(count)
    if args.out:
        Path(args.out).write_bytes(res.stream(count))
    if args.lost_out:
        channel.write_trace(args.lost_out, [int(res.frames.get(s) is None) for s in range(count)])
    print(
        f"frames {count}, lost {len(lost)}, received {res.received}, "
        f"dropped {res.dropped}, malformed {res.malformed}, late {res.late}",
        file=sys.stderr,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptfec", description="Adaptive low-latency streaming FEC tools")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-code", help="construct a (T,B,N) code and print its table record")
    g.add_argument("--T", type=int, required=True)
    g.add_argument("--B", type=int, required=True)
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--append", action="store_true", help="append to --out instead of overwriting")
    g.add_argument("--search", action="store_true", help="always search, ignoring the packaged table")
    g.set_defaults(func=cmd_gen_code, subparser=g)

    v = sub.add_parser("verify-code", help="verify every code in a code-table file")
    v.add_argument("--table", required=True)
    v.add_argument("--exhaustive", action="store_true", help="walk every admissible pattern")
    v.set_defaults(func=cmd_verify_code, subparser=v)

    t = sub.add_parser("gen-trace", help="generate a Fritchman loss trace")
    t.add_argument("--model", choices=["fritchman"], default="fritchman")
    t.add_argument("--M", type=int, default=5)
    t.add_argument("--alpha", type=float, default=0.005)
    t.add_argument("--beta", type=float, default=0.990)
    t.add_argument("--epsilon", type=float, default=0.001)
    t.add_argument("--len", type=int, default=360_000)
    t.add_argument("--phases", type=int, choices=[1, 3], default=3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out")
    t.add_argument("--histogram", help="also write the burst-length histogram CSV here")
    t.set_defaults(func=cmd_gen_trace, subparser=t)

    r = sub.add_parser("run", help="run one strategy over a loss trace")
    r.add_argument("--strategy", choices=[s.value for s in harness.Strategy], required=True)
    r.add_argument("--T", type=int, default=10)
    r.add_argument("--L", type=int, default=1000)
    r.add_argument("--sessions", type=int, default=360)
    r.add_argument("--frame-bytes", type=int, default=300)
    r.add_argument("--trace", required=True)
    r.add_argument("--out-csv")
    r.add_argument("--B", type=int)
    r.add_argument("--N", type=int)
    r.set_defaults(func=cmd_run, subparser=r)

    s = sub.add_parser("send", help="stream frames over UDP")
    s.add_argument("--peer", required=True, help="receiver host:port")
    s.add_argument("--bind", help="local host:port")
    s.add_argument("--tick-ms", type=float, default=10.0, help="0 runs in lockstep with the receiver")
    s.add_argument("--input", help="file to stream; cut into fixed-size frames")
    s.add_argument("--frames", type=int, help="frame count (random frames when --input is absent)")
    s.add_argument("--frame-bytes", type=int, default=transport.DEFAULT_FRAME_BYTES)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--T", type=int, default=10)
    s.set_defaults(func=cmd_send, subparser=s)

    c = sub.add_parser("recv", help="receive, decode and send feedback")
    c.add_argument("--bind", required=True, help="host:port to listen on")
    c.add_argument("--drop-trace", help="discard packets whose seq is marked 1")
    c.add_argument("--out", help="write recovered bytes here (lost frames as zeros)")
    c.add_argument("--lost-out", help="write the lost-frame trace here")
    c.add_argument("--frames", type=int, help="stop after this many frames")
    c.add_argument("--idle-timeout", type=float, default=5.0)
    c.add_argument("--tick-ms", type=float, default=0.0)
    c.add_argument("--T", type=int, default=10)
    c.add_argument("--L", type=int, default=1000)
    c.add_argument("--ready-file", help="write the bound port here once listening")
    c.set_defaults(func=cmd_recv, subparser=c)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args, args.subparser)


if __name__ == "__main__":
    sys.exit(main())
