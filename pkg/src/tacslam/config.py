''' 
Module: config.py
Description: User configuration store (~/.config/tacslam/.config.json)

Usage:
[CONFIG_FILE]
- load_config(): Load configuration from the file
- save_config(): Save configuration to the file

[Information]
- get_info(): Retrieve information based on id
- set_info(): Store information based on id
- del_info(): Delete information based on id

Pipeline settings are stored under dotted ids (e.g., tracking.k_pixels) and sit
between the built-in defaults and a --config YAML file.
'''

# Import Packages
import json
import os
from pathlib import Path

from rich import print as rprint

from .utils import try_parse

# CONFIG_FILE
CONFIG_DIR = Path(os.environ.get("TACSLAM_CONFIG_DIR", os.path.expanduser("~/.config/tacslam")))
CONFIG_FILE = CONFIG_DIR / ".config.json"

def load_config() -> dict:
    """
    load_config(): Load configuration from the file
    
    Dependencies: json
    """
    path = Path(CONFIG_FILE)
    if path.exists():
        try:
            return json.loads(path.read_text() or "{}")
        except json.JSONDecodeError:
            rprint(f"[red]Ignoring unreadable configuration file {path}[/red]")
    return {}  # Return empty dict if config file doesn't exist

def save_config(config: dict):
    """
    save_config(): Save configuration to the file
    
    Dependencies: json
    """
    path = Path(CONFIG_FILE)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config, indent=4))

# Information
def get_info(id: str=None):
    """
    get_info(): Retrieve information based on id
    
    Parameters:
    id (str, optional): identifier from configuration file (Default: None)

    Dependencies: load_config()
    """
    config = load_config()
    info = config.get(id, None)

    # Report on information status
    if info is not None: rprint(f"Got {id}: {info}")
    else: rprint(f"Configuration File:\n{json.dumps(config, indent=4)}")
    return info

def set_info(id: str, info: str | dict | list | tuple):
    """
    set_info(): Store information based on id
    
    Parameters:
    id (str): identifier for configuration file (e.g., tracking.k_pixels)
    info (str | dict | list | tuple): value; strings are parsed as Python literals

    Dependencies: try_parse(),load_config(),save_config()
    """
    info = try_parse(info)
    if isinstance(info, (set, tuple)):
        info = list(info)

    config = load_config()
    config[id] = info
    save_config(config)
    rprint(f"Set {id}: {info}")

def del_info(id: str):
    """
    del_info(): Delete information based on id
    
    Parameters:
    id (str): identifier for configuration file

    Dependencies: load_config(),save_config()
    """
    config = load_config()
    config.pop(id, None)
    save_config(config)
    rprint(f"Deleted {id}")
