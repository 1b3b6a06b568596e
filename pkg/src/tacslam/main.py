#!/usr/bin/env python
# PYTHON_ARGCOMPLETE_OK
'''
Module: main.py
Description: Tactile SLAM command line (simulate, calibrate, slam, reconstruct, evaluate, concat)

Usage:
[Logging]
- setup_logging(): RichHandler on the tacslam logger; -v for DEBUG, -q for WARNING

[Main method]
- main(): parse arguments and dispatch to a subcommand
'''
# Import packages
from __future__ import annotations # NEEDS TO BE FIRST LINE
import logging
import sys
import argparse
import argcomplete
from rich_argparse import RichHelpFormatter
from rich.logging import RichHandler

from . import config
from . import utils

from tacslam.sim import cli as sim_cli
from tacslam.pipeline import cli as pipeline_cli

# Logging
def setup_logging(verbose: int = 0, quiet: bool = False) -> logging.Logger:
    '''
    setup_logging(): attach one RichHandler to the package logger

    Parameters:
    verbose (int, optional): 1+ switches INFO to DEBUG (Default: 0)
    quiet (bool, optional): only warnings and errors (Default: False)
    '''
    logger = logging.getLogger("tacslam")
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logger.setLevel(level)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        logger.addHandler(RichHandler(show_path=False, rich_tracebacks=True, markup=False))
    logger.propagate = False
    return logger

# Main method
def main(argv=None):
    '''
    main(): Tactile SLAM command line
    '''
    # Custom formatter for rich help messages
    class MyFormatter(RichHelpFormatter):
        styles = {
            "argparse.prog": "green",           # program name
            "argparse.args": "cyan",            # positional arguments
            "argparse.option": "",              # options like --flag
            "argparse.metavar": "dark_magenta", # meta variable (actual function argument name)
            "argparse.help": "blue",            # help text
            "argparse.text": "green",           # normal text in help message
            "argparse.groups": "red",           # group titles
            "argparse.description": "",         # description at the top
            "argparse.epilog": "",              # ... -h; epilog at the bottom
            "argparse.syntax": "white",         # []
        }

    # Add parser and subparsers
    parser = argparse.ArgumentParser(description="Tactile SLAM: tracking, loop closure, pose graph and reconstruction from tactile images", formatter_class=MyFormatter)
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")
    subparsers = parser.add_subparsers(dest="command") # dest="command" required for autocomplete

    '''
    tacslam.utils:
    - run_bundled_script(): Run a bundled script from the package script resources.
    '''
    parser_autocomplete = subparsers.add_parser("autocomplete", help="Enable tacslam autocomplete", description="Enable tacslam autocomplete", formatter_class=MyFormatter) # Run autocomplete script (args.command == "autocomplete")
    parser_autocomplete.add_argument("shell", nargs="?", choices=["bash", "zsh"], help="Shell to configure (Default: login shell)")

    '''
    tacslam.config:
    - get_info: Retrieve information based on id
    - set_info: Set information based on id
    - del_info: Delete information based on id
    '''
    parser_config = subparsers.add_parser("config", help="User configuration store", description="Pipeline defaults stored as dotted ids (e.g., tracking.k_pixels)", formatter_class=MyFormatter)
    subparsers_config = parser_config.add_subparsers()
    parser_config.set_defaults(func=lambda: parser_config.print_help())

    # Add subparsers for config module
    parser_config_get_info = subparsers_config.add_parser("get", help="Retrieve information based on id", description="Retrieve information based on id", formatter_class=MyFormatter)
    parser_config_set_info = subparsers_config.add_parser("set", help="Set information based on id", description="Set information based on id", formatter_class=MyFormatter)
    parser_config_del_info = subparsers_config.add_parser("del", help="Delete information based on id", description="Delete information based on id", formatter_class=MyFormatter)

    # get_info() arguments
    parser_config_get_info.add_argument("--id", type=str, help="Identifier from/for configuration file (e.g., tracking.k_pixels or run.mode)")

    # Common set_info() and del_info() arguments
    for parser_common in [parser_config_set_info, parser_config_del_info]:
        parser_common.add_argument("--id", type=str, help="Identifier from/for configuration file (e.g., tracking.k_pixels or run.mode)", required=True)

    # set_info() arguments
    parser_config_set_info.add_argument("--info", type=str, help="Value (parsed as a Python literal; e.g., 3000 or 'gnc')", required=True)

    # default functions
    parser_config_get_info.set_defaults(func=config.get_info)
    parser_config_set_info.set_defaults(func=config.set_info)
    parser_config_del_info.set_defaults(func=config.del_info)

    # sim module subparsers: simulate/calibrate
    sim_cli.add_subparser(subparsers, MyFormatter)

    # pipeline module subparsers: slam/reconstruct/evaluate/concat
    pipeline_cli.add_subparser(subparsers, MyFormatter)

    # default: show help if no subcommand
    parser.set_defaults(func=lambda _: parser.print_help())

    # Enable autocomplete
    argcomplete.autocomplete(parser)

    # Parse all arguments
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)

    if args.command == 'autocomplete': # Run autocomplete script
        sys.exit(utils.run_bundled_script(args=[args.shell] if args.shell else []))

    elif args.command in ('simulate', 'calibrate', 'slam', 'reconstruct', 'evaluate', 'concat'):
        return pipeline_cli.run(args)

    elif args.command is None: # No subcommand
        parser.print_help()
        return 0

    else: # Run other functions
        args_dict = vars(args)
        for key in ('command', 'verbose', 'quiet'):
            args_dict.pop(key)
        func = args_dict.pop("func")
        func(**args_dict)
        return 0
