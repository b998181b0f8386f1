import logging
import sys
from typing import Optional, Sequence

import click
import typer
from pydantic import ValidationError

from commands import jacobi, nitsche, solve, transform, weakform, zoo
from dependencies import configure_logging
from errors import Sigma2Error

logger = logging.getLogger("sigma2")

# Initialize the command-line app
app = typer.Typer(
    name="sigma2",
    help="Verification toolkit for the quadratic Hessian equation sigma2(D^2 u) = 1",
    add_completion=False,
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="log at DEBUG level")):
    configure_logging(verbose)


def include_commands(target: typer.Typer, router: typer.Typer) -> None:
    target.registered_commands.extend(router.registered_commands)


# Include all command modules
include_commands(app, zoo.router)
include_commands(app, jacobi.router)
include_commands(app, transform.router)
include_commands(app, solve.router)
include_commands(app, weakform.router)
include_commands(app, nitsche.router)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns 0 on success, 2 on an invariant violation and 1
    on usage or domain errors."""
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = app(args=args, prog_name="sigma2", standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ValidationError as exc:
        logger.error("invalid input: %s", exc)
        return 1
    except Sigma2Error as exc:
        logger.error("%s: %s", type(exc).__name__, exc.detail)
        return exc.exit_code
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(run())
