"""Command-line entry point and wire-protocol environment server.

Commands: train, evaluate, baseline, serve-env, print-spec. The serve-env
command exposes one hospital environment per connection over newline-
delimited JSON (protocol "bedwarden-env-1"), either on stdio or TCP, so
external agent processes can drive it through the usual reset/step calls.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import socketserver
import sys

from .agents import VARIANTS, AgentConfig
from .env_api import EnvironmentError_
from .hospital_env import ConfigError, HospitalConfig, HospitalEnv
from .trainer import BASELINE_POLICIES, TrainConfig, evaluate, run_baseline, train, write_metrics

__all__ = ["main", "parse_and_dispatch", "serve_env", "EnvSession", "PROTOCOL_VERSION"]

PROTOCOL_VERSION = "bedwarden-env-1"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; remap to the documented
    # usage exit code and keep the message on stderr.
    def error(self, message):
        raise _UsageError(message)


def _load_env_config(path) -> HospitalConfig:
    if path is None:
        return HospitalConfig()
    return HospitalConfig.from_file(path)


def _build_parser() -> _Parser:
    parser = _Parser(prog="bedwarden", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="train an agent and write metrics/trace/checkpoint")
    train_p.add_argument("--config", help="environment config file (JSON)")
    train_p.add_argument("--agent", default="d3qn", choices=sorted(VARIANTS),
                         help="agent variant")
    train_p.add_argument("--episodes", type=int, default=100)
    train_p.add_argument("--seed", type=int, default=0, help="environment seed base")
    train_p.add_argument("--agent-seed", type=int, default=None,
                         help="agent seed (defaults to seed + 1)")
    train_p.add_argument("--out", required=True, help="output directory")
    train_p.add_argument("--render-every", type=int, default=None,
                         help="render every step of every Nth episode")
    train_p.add_argument("--timing", action="store_true",
                         help="write wall-clock seconds into metrics.csv "
                              "(breaks bitwise reproducibility)")
    train_p.add_argument("--trace-all", action="store_true",
                         help="trace every episode, not just the last")

    eval_p = sub.add_parser("evaluate", help="greedy evaluation of a checkpoint")
    eval_p.add_argument("--checkpoint", required=True)
    eval_p.add_argument("--config", help="environment config file (JSON)")
    eval_p.add_argument("--episodes", type=int, default=10)
    eval_p.add_argument("--seed", type=int, default=0)
    eval_p.add_argument("--out", default=None, help="optional directory for metrics.csv")

    base_p = sub.add_parser("baseline", help="run a non-learning baseline policy")
    base_p.add_argument("--policy", required=True, choices=BASELINE_POLICIES)
    base_p.add_argument("--config", help="environment config file (JSON)")
    base_p.add_argument("--episodes", type=int, default=10)
    base_p.add_argument("--seed", type=int, default=0)
    base_p.add_argument("--out", default=None, help="optional directory for metrics.csv and trace.csv")

    serve_p = sub.add_parser("serve-env", help="serve an environment over the wire protocol")
    serve_p.add_argument("--config", help="environment config file (JSON)")
    serve_p.add_argument("--transport", default="stdio", choices=("stdio", "tcp"))
    serve_p.add_argument("--port", type=int, default=0,
                         help="TCP port (0 picks a free one; printed on stderr)")
    serve_p.add_argument("--host", default="127.0.0.1")

    spec_p = sub.add_parser("print-spec", help="print the environment spec as JSON")
    spec_p.add_argument("--config", help="environment config file (JSON)")
    return parser


def _cmd_train(args) -> int:
    agent_seed = args.agent_seed if args.agent_seed is not None else args.seed + 1
    config = TrainConfig(
        episodes=args.episodes,
        env=_load_env_config(args.config),
        agent=AgentConfig(variant=args.agent),
        env_seed=args.seed,
        agent_seed=agent_seed,
        render_every=args.render_every,
        out_dir=args.out,
        trace_all=args.trace_all,
        timing_in_csv=args.timing,
    )
    result = train(config)
    last = result.metrics[-1]
    print(f"trained {args.episodes} episodes; last episode mean reward "
          f"{last.mean_reward:.3f}; outputs in {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    metrics = evaluate(args.checkpoint, _load_env_config(args.config), args.episodes, args.seed)
    mean = sum(m.mean_reward for m in metrics) / len(metrics)
    print(f"evaluated {args.episodes} episodes; mean reward per step {mean:.3f}")
    if args.out:
        write_metrics(metrics, [], args.out)
    return EXIT_OK


def _cmd_baseline(args) -> int:
    metrics, trace = run_baseline(args.policy, _load_env_config(args.config), args.episodes, args.seed)
    mean = sum(m.mean_reward for m in metrics) / len(metrics)
    print(f"baseline {args.policy}: {args.episodes} episodes; mean reward per step {mean:.3f}")
    if args.out:
        write_metrics(metrics, trace, args.out)
    return EXIT_OK


def _cmd_print_spec(args) -> int:
    env = HospitalEnv(_load_env_config(args.config))
    print(json.dumps(_spec_payload(env)))
    return EXIT_OK


def _spec_payload(env: HospitalEnv) -> dict:
    spec = env.spec
    return {
        "action_size": spec.action_size,
        "observation_size": spec.observation_size,
        "actions": list(spec.actions),
    }


class EnvSession:
    """One environment driven by newline-delimited JSON requests.

    Strictly sequential: one response per request, in order. Malformed
    requests produce an error response without ending the session; only
    "close" (or transport EOF) ends it.
    """

    def __init__(self, config: HospitalConfig):
        self.env = HospitalEnv(config)
        self.closed = False

    def handshake(self) -> dict:
        return {"protocol": PROTOCOL_VERSION}

    def handle(self, line: str) -> dict:
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"error": f"malformed message: {exc}"}
        if not isinstance(message, dict) or "cmd" not in message:
            return {"error": 'malformed message: expected {"cmd": ...}'}
        cmd = message["cmd"]
        try:
            if cmd == "spec":
                return _spec_payload(self.env)
            if cmd == "reset":
                seed = message.get("seed")
                if seed is not None and not isinstance(seed, int):
                    return {"error": "reset seed must be an integer"}
                obs = self.env.reset(seed=seed)
                return {"obs": [float(x) for x in obs]}
            if cmd == "step":
                action = message.get("action")
                if not isinstance(action, int) or isinstance(action, bool):
                    return {"error": "step requires an integer action index"}
                result = self.env.step(action)
                return {
                    "obs": [float(x) for x in result.observation],
                    "reward": float(result.reward),
                    "terminal": bool(result.terminal),
                    "info": result.info,
                }
            if cmd == "render":
                return {"render": self.env.render()}
            if cmd == "close":
                self.closed = True
                return {"ok": True}
            return {"error": f"unknown command {cmd!r}"}
        except EnvironmentError_ as exc:
            return {"error": str(exc)}
        except Exception as exc:  # keep the session alive on server bugs
            return {"error": f"internal error: {exc}"}


def _serve_stream(config: HospitalConfig, reader, writer):
    session = EnvSession(config)

    def send(payload):
        writer.write(json.dumps(payload) + "\n")
        writer.flush()

    send(session.handshake())
    for line in reader:
        line = line.strip()
        if not line:
            continue
        send(session.handle(line))
        if session.closed:
            break


def serve_env(config: HospitalConfig, transport: str = "stdio",
              host: str = "127.0.0.1", port: int = 0):
    """Serve environments until the peer closes (stdio) or forever (tcp).

    Each TCP connection gets an independent environment on its own thread;
    within a connection processing is strictly serial.
    """
    if transport == "stdio":
        _serve_stream(config, sys.stdin, sys.stdout)
        return

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            reader = (raw.decode() for raw in self.rfile)

            class _W:
                def write(_self, text):
                    self.wfile.write(text.encode())

                def flush(_self):
                    self.wfile.flush()

            try:
                _serve_stream(config, reader, _W())
            except (BrokenPipeError, ConnectionResetError):
                pass

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Handler) as server:
        actual_port = server.server_address[1]
        print(f"serving {PROTOCOL_VERSION} on {host}:{actual_port}", file=sys.stderr, flush=True)
        server.serve_forever()


def parse_and_dispatch(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "baseline":
            return _cmd_baseline(args)
        if args.command == "print-spec":
            return _cmd_print_spec(args)
        if args.command == "serve-env":
            serve_env(_load_env_config(args.config), args.transport, args.host, args.port)
            return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_USAGE


def main() -> int:
    return parse_and_dispatch()


if __name__ == "__main__":
    sys.exit(main())
