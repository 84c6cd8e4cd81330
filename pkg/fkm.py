#!/usr/bin/env python3

import json
import os
import sys

from lib.argument_parser import ArgumentParser
from lib.commands import COMMANDS
from lib.errors import FkmError
from lib.log_setup import add_file_handler, logger, set_level
from lib.usersettings import UserSettings

ROOT = os.path.dirname(os.path.abspath(__file__))
DEFAULT_SETTINGS = os.path.join(ROOT, "config", "default_settings.xml")
USER_SETTINGS = os.path.join(ROOT, "config", "settings.xml")


def load_settings(args):
    settings = UserSettings(args.settings or USER_SETTINGS, DEFAULT_SETTINGS)

    set_level(args.log_level or settings.get_str(("runtime", "log_level"), "INFO"))
    if not os.environ.get("FKM_LOG_FILE"):
        add_file_handler(settings.get_str(("runtime", "log_file")))
    return settings


def main(argv=None):
    args = ArgumentParser(argv).args
    try:
        settings = load_settings(args)
        logger.debug(f"Running {args.command}")
        summary = COMMANDS[args.command](args, settings)
    except FkmError as error:
        print(f"error: {error.reason}: {error}", file=sys.stderr)
        return error.exit_code
    print(json.dumps(summary, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
