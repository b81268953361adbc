"""Run-config loading: read, tokenize, parse, analyze"""
import logging
from pathlib import Path

from .analyzer import ConfigAnalyzer
from .errors import ConfigError
from .lexer import Lexer
from .parser import Parser
from .runconfig import RunConfig

LOGGER = logging.getLogger(__name__)


def load_config_text(source: str, filename: str = "<config>", base_dir=None) -> RunConfig:
    tokens = Lexer(source, filename).tokenize()
    tree = Parser(tokens, filename).parse()
    return ConfigAnalyzer(base_dir).analyze(tree)


def load_config(path) -> RunConfig:
    """Load a run config; relative paths inside it resolve against its directory."""
    path = Path(path)
    try:
        source = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    config = load_config_text(source, str(path), path.parent)
    LOGGER.info("config_loaded | path=%s | T=%d | d=%d | variant=%s",
                path, config.T, config.d, config.solver.variant.value)
    return config
