"""
Lifespan Laboratory Tools
Declarative command definitions; main.py turns each one into a CLI subcommand
"""

LAB_TOOLS = [
    {
        "type": "function",
        "function": {
            "name": "exponents",
            "description": "Print every critical exponent and competing lifespan exponent for one (n, mu, p).",
            "parameters": {
                "type": "object",
                "properties": {
                    "n": {
                        "type": "integer",
                        "description": "Space dimension"
                    },
                    "mu": {
                        "type": "number",
                        "description": "Damping coefficient mu > 0"
                    },
                    "p": {
                        "type": "number",
                        "description": "Power of the nonlinearity, p > 1; without it only the p-independent exponents are reported"
                    },
                    "json": {
                        "type": "boolean",
                        "description": "Emit the report as JSON"
                    }
                },
                "required": ["n", "mu"]
            }
        }
    },
    {
        "type": "function",
        "function": {
            "name": "certificate",
            "description": "Compute every explicit constant of the blow-up argument and write the certificate as JSON.",
            "parameters": {
                "type": "object",
                "properties": {
                    "config": {
                        "type": "string",
                        "description": "Problem config file (KEY=VALUE)"
                    },
                    "out": {
                        "type": "string",
                        "description": "Output path for cert.json"
                    }
                },
                "required": ["config", "out"]
            }
        }
    },
    {
        "type": "function",
        "function": {
            "name": "solve",
            "description": "Integrate the radial problem for one eps and write the functional trace plus its .meta.json sidecar.",
            "parameters": {
                "type": "object",
                "properties": {
                    "config": {
                        "type": "string",
                        "description": "Problem config file (KEY=VALUE)"
                    },
                    "eps": {
                        "type": "number",
                        "description": "Size of the initial data"
                    },
                    "form": {
                        "type": "string",
                        "enum": ["original", "liouville"],
                        "description": "Equation form to integrate (default: original)"
                    },
                    "refine": {
                        "type": "boolean",
                        "description": "Re-run with dt/2 to measure the blow-up time change"
                    },
                    "out": {
                        "type": "string",
                        "description": "Output path for trace.csv"
                    }
                },
                "required": ["config", "eps", "out"]
            }
        }
    },
    {
        "type": "function",
        "function": {
            "name": "verify",
            "description": "Check a stored trace against the certified lower bounds and the key identity. Exits with status 2 on a violated bound.",
            "parameters": {
                "type": "object",
                "properties": {
                    "trace": {
                        "type": "string",
                        "description": "Trace CSV written by solve"
                    },
                    "cert": {
                        "type": "string",
                        "description": "Certificate JSON written by certificate"
                    }
                },
                "required": ["trace", "cert"]
            }
        }
    },
    {
        "type": "function",
        "function": {
            "name": "sweep",
            "description": "Solve for a list of eps values, fit the lifespan scaling and check every entry against the certified bound.",
            "parameters": {
                "type": "object",
                "properties": {
                    "config": {
                        "type": "string",
                        "description": "Problem config file (KEY=VALUE)"
                    },
                    "eps_list": {
                        "type": "string",
                        "description": "Comma separated eps values (default: 6 geometric values from 0.8 with ratio 0.7)"
                    },
                    "jobs": {
                        "type": "integer",
                        "description": "Number of concurrent solves (default: 1)"
                    },
                    "error_log": {
                        "type": "string",
                        "description": "Optional path for the error and recovery log"
                    },
                    "out": {
                        "type": "string",
                        "description": "Output path for sweep.csv"
                    }
                },
                "required": ["config", "out"]
            }
        }
    },
    {
        "type": "function",
        "function": {
            "name": "plot",
            "description": "Emit the scaling data file, a matplotlib script and a text summary for a stored sweep.",
            "parameters": {
                "type": "object",
                "properties": {
                    "sweep": {
                        "type": "string",
                        "description": "sweep.csv written by sweep"
                    },
                    "out": {
                        "type": "string",
                        "description": "Output directory"
                    }
                },
                "required": ["sweep", "out"]
            }
        }
    }
]
