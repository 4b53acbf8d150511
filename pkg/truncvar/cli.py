"""
Entry point of the truncvar command line.

    python -m truncvar tv --c 0.5 --in path.csv
    python -m truncvar verify --max-n 6

Exit codes: 0 on success, 1 on invalid input or a numerical failure, 2 when verification
fails. Errors are written to stderr as {"error": <class name>, "message": <text>}.
"""

import json
import sys
import traceback
from typing import Optional, Sequence, TextIO

from setup.logger import log, set_level

from .exceptions import NumericalError, PathValidationError, ValidationError, VerificationFailure
from .run_config import RunConfig
from .views import VIEWS


def _error(stderr: TextIO, error: Exception) -> None:
    payload = {"error": type(error).__name__, "message": str(error)}
    if isinstance(error, PathValidationError) and error.line_numbers:
        payload["line_numbers"] = error.line_numbers
    stderr.write(json.dumps(payload) + "\n")


def _emit(text: str, output_path: Optional[str], stdout: TextIO) -> None:
    if output_path:
        with open(output_path, "w", newline="\n") as handle:
            handle.write(text)
    else:
        stdout.write(text)


def run(argv: Sequence[str], stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """
    Parse argv, run the subcommand and write its output.

    Args:
        argv: Arguments without the program name
        stdout: Stream for results (default sys.stdout)
        stderr: Stream for error JSON (default sys.stderr)

    Returns:
        int: Exit code
    """
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    config = None
    try:
        # 1. Parse and validate every flag
        config = RunConfig.of(argv)
        if config.log_level:
            set_level(config.log_level)
        log.info(f"Running {config.subcommand.name.lower()}")

        # 2. Compute
        response = VIEWS[config.subcommand](config)

        # 3. Emit
        _emit(response.body, config.output_path, stdout)
        log.info(f"Finished {config.subcommand.name.lower()}")
        return 0
    except VerificationFailure as e:
        _emit(e.report, config.output_path if config else None, stdout)
        log.error(f"Verification failed: {e}")
        _error(stderr, e)
        return 2
    except (ValidationError, NumericalError) as e:
        log.error(f"{type(e).__name__}: {e}")
        _error(stderr, e)
        return 1
    except Exception as e:
        log.error(f"Exception in run: {e}\n{traceback.format_exc()}")
        _error(stderr, e)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))
