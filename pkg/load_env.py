import os
import logging

from dotenv import dotenv_values

from errors import ConfigError

DEFAULT_PROFILE = "standard"

def load_settings(profile=None, config_path="config.env"):
    """
    Loads the primary config.env to get PROFILE,
    then loads the corresponding .env.<profile> file.

    Values are read from the files only; the process environment is never
    consulted, so runs are reproducible from the command line alone.

    Args:
        profile (str, optional): Overrides the PROFILE named in config.env.
        config_path (str): Path of the primary file. Profile files are
            looked up next to it.

    Returns:
        dict: Raw string settings, with the "PROFILE" key always present.

    Raises:
        ConfigError: When an explicitly requested profile file does not exist.
    """
    base_dir = os.path.dirname(os.path.abspath(config_path))
    settings = {}
    if os.path.exists(config_path):
        settings.update({k: v for k, v in dotenv_values(config_path).items() if v is not None})
    else:
        logging.debug(f"No {config_path} found, using built-in defaults")

    explicit = profile is not None
    profile = (profile or settings.get("PROFILE") or DEFAULT_PROFILE).strip().lower()
    dotenv_path = os.path.join(base_dir, f".env.{profile}")

    if os.path.exists(dotenv_path):
        settings.update({k: v for k, v in dotenv_values(dotenv_path).items() if v is not None})
        logging.debug(f"Loaded settings from {dotenv_path}")
    elif explicit:
        raise ConfigError(f"profile file {dotenv_path} not found")

    settings["PROFILE"] = profile
    return settings
