"""
Lifespan Lab Entry Point
Command-line interface; one subcommand per LAB_TOOLS entry, dispatched through execute_tool
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from certificate import compute_constants, read_certificate, write_certificate
from error_recovery import ErrorRecoverySystem, LabError
from exponents import format_report, lifespan_exponent_table
from harness import default_eps_list, emit_plots, read_sweep, summary_text, sweep, write_sweep
from lab_tools import LAB_TOOLS
from problem_spec import load_config
from solver import key_identity_residual, read_trace, solve, verify_lower_bounds, write_trace

load_dotenv()

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)
logging.getLogger().setLevel(os.getenv("LIFESPAN_LOG_LEVEL", "INFO").upper())

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BOUND_VIOLATED = 2

TYPE_MAP = {"integer": int, "number": float, "string": str}


def build_parser() -> argparse.ArgumentParser:
    """One subcommand per LAB_TOOLS entry"""
    parser = argparse.ArgumentParser(
        prog="lifespan-lab",
        description="Blow-up and lifespan laboratory for the scale-invariant damped semilinear wave equation",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for tool in LAB_TOOLS:
        function = tool["function"]
        sub = subparsers.add_parser(function["name"], help=function["description"],
                                    description=function["description"])
        parameters = function["parameters"]
        required = set(parameters.get("required", []))
        for name, prop in parameters["properties"].items():
            flag = "--" + name.replace("_", "-")
            if prop["type"] == "boolean":
                sub.add_argument(flag, dest=name, action="store_true", help=prop["description"])
                continue
            kwargs: Dict[str, Any] = {
                "dest": name,
                "type": TYPE_MAP[prop["type"]],
                "required": name in required,
                "help": prop["description"],
            }
            if "enum" in prop:
                kwargs["choices"] = prop["enum"]
            sub.add_argument(flag, **kwargs)
    return parser


def _parse_eps_list(text: Optional[str]) -> List[float]:
    if not text:
        return default_eps_list()
    return [float(item) for item in text.split(",") if item.strip()]


def execute_tool(tool_name: str, arguments: Dict[str, Any]) -> Dict[str, Any]:
    """Run one laboratory command"""
    try:
        if tool_name == "exponents":
            report = lifespan_exponent_table(arguments["n"], arguments["mu"], arguments.get("p"))
            output = report.to_json() if arguments.get("json") else format_report(report)
            return {"success": True, "output": output, "report": report.to_dict()}

        elif tool_name == "certificate":
            spec = load_config(arguments["config"])
            cert = compute_constants(spec)
            path = write_certificate(cert, arguments["out"])
            output = (f"T0={cert.t0!r} C4={cert.c4!r} exponent={cert.lifespan_exponent!r}\n"
                      f"certificate written to {path}")
            return {"success": True, "output": output, "file": str(path)}

        elif tool_name == "solve":
            spec = load_config(arguments["config"])
            trace = solve(spec, arguments["eps"], arguments.get("form") or "original",
                          refine=bool(arguments.get("refine")))
            csv_path, meta_path = write_trace(trace, arguments["out"])
            verdict = f"T_num={trace.blowup.t_num!r}" if trace.blowup else "no blow-up"
            output = f"{trace.terminated_reason}: {verdict}\ntrace written to {csv_path} and {meta_path}"
            return {"success": trace.terminated_reason != "instability", "output": output, "file": str(csv_path)}

        elif tool_name == "verify":
            trace = read_trace(arguments["trace"])
            cert = read_certificate(arguments["cert"])
            report = verify_lower_bounds(trace, cert, trace.spec, trace.eps)
            residual = key_identity_residual(trace, trace.spec.mu)
            cutoff = 0.8 * trace.blowup.t_num if trace.blowup else trace.times[-1]
            window = residual[trace.times <= cutoff]
            data = report.to_dict()
            data["key_residual_max"] = float(window.max()) if window.size else 0.0
            return {
                "success": report.ok,
                "bound_violated": not report.ok,
                "output": json.dumps(data, indent=2, sort_keys=True),
            }

        elif tool_name == "sweep":
            spec = load_config(arguments["config"])
            recovery = ErrorRecoverySystem()
            result = sweep(spec, _parse_eps_list(arguments.get("eps_list")),
                           jobs=arguments.get("jobs") or 1, recovery=recovery)
            path = write_sweep(result, arguments["out"])
            if arguments.get("error_log"):
                recovery.export_logs(arguments["error_log"])
            return {
                "success": True,
                "output": summary_text(result) + f"sweep written to {path}",
                "file": str(path),
            }

        elif tool_name == "plot":
            result = read_sweep(arguments["sweep"])
            files = emit_plots(result, arguments["out"])
            return {"success": True, "output": "\n".join(str(f) for f in files), "files": [str(f) for f in files]}

        return {"success": False, "error": f"Unknown tool: {tool_name}"}

    except (LabError, OSError, KeyError, ValueError) as e:
        logger.error(f"Error executing {tool_name}: {e}")
        return {"success": False, "error": str(e)}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    arguments = {k: v for k, v in vars(args).items() if k != "command" and v is not None}
    result = execute_tool(args.command, arguments)

    if result.get("output"):
        print(result["output"])
    if not result["success"]:
        if result.get("error"):
            print(f"error: {result['error']}", file=sys.stderr)
        return EXIT_BOUND_VIOLATED if result.get("bound_violated") else EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
