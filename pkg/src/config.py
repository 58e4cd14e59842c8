import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional

from dotenv import dotenv_values, load_dotenv

from .errors import ConfigError

load_dotenv()


class Config:
    # Data locations (SensEval-3 lexical sample + GloVe)
    TRAIN_PATH = os.getenv("WSD_TRAIN_PATH")
    TEST_PATH = os.getenv("WSD_TEST_PATH")
    KEY_PATH = os.getenv("WSD_KEY_PATH")
    GLOVE_PATH = os.getenv("WSD_GLOVE_PATH")

    # Outputs
    OUTPUT_DIR = os.getenv("WSD_OUTPUT_DIR", "artifacts/runs")
    MODEL_FILENAME = "model.sbw"
    LOG_FILENAME = "training_log.csv"

    # Execution
    SEED = int(os.getenv("WSD_SEED", "42"))
    THREADS = int(os.getenv("WSD_THREADS", "1"))

    @classmethod
    def get_data_paths(cls) -> Dict[str, Optional[str]]:
        """Return the data paths configured through the environment."""
        return {
            "train_path": cls.TRAIN_PATH,
            "test_path": cls.TEST_PATH,
            "key_path": cls.KEY_PATH,
            "glove_path": cls.GLOVE_PATH,
        }


@dataclass
class HyperParams:
    """
    Network and training hyperparameters.

    Defaults are the values used for the SensEval-3 runs; the trailing
    comments give the range that was searched during tuning.
    """
    left_context: int = 15          # [10, 100]
    right_context: int = 15         # [10, 100]
    embedding_size: int = 100       # {50, 100, 200, 300}
    hidden_size: int = 50           # [50, 300], per direction
    fc_size: int = 50
    dropout_embed: float = 0.20     # [0, 0.5]
    dropout_lstm_out: float = 0.50  # [0, 0.7]
    dropout_fc: float = 0.50        # [0, 0.7]
    word_dropout: float = 0.20      # [0, 0.5]
    learning_rate: float = 1e-3
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 5
    validation_fraction: float = 0.05
    word_init: str = "glove"        # glove | random
    refit_full: bool = False
    log_timing: bool = True
    seed: int = 42

    def validate(self) -> "HyperParams":
        counts = {
            "left_context": self.left_context,
            "right_context": self.right_context,
            "embedding_size": self.embedding_size,
            "hidden_size": self.hidden_size,
            "fc_size": self.fc_size,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
        }
        for name, value in counts.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.patience < 0:
            raise ConfigError(f"patience must be >= 0, got {self.patience}")

        for name in ("dropout_embed", "dropout_lstm_out", "dropout_fc", "word_dropout"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {rate}")

        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError(f"validation_fraction must be in (0, 1), got {self.validation_fraction}")
        if self.learning_rate <= 0 or self.rms_epsilon <= 0:
            raise ConfigError("learning_rate and rms_epsilon must be positive")
        if not 0.0 <= self.rms_decay < 1.0:
            raise ConfigError(f"rms_decay must be in [0, 1), got {self.rms_decay}")
        if self.word_init not in ("glove", "random"):
            raise ConfigError(f"word_init must be 'glove' or 'random', got {self.word_init!r}")
        return self

    def with_overrides(self, **changes) -> "HyperParams":
        return replace(self, **changes).validate()


def _coerce(raw: str, template):
    """Convert a config string to the type of the template default."""
    if isinstance(template, bool):
        lowered = str(raw).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"Expected a boolean, got {raw!r}")
    try:
        return type(template)(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Cannot read {raw!r} as {type(template).__name__}: {e}")


HYPERPARAM_FIELDS = {f.name: f for f in fields(HyperParams)}
PATH_KEYS = ("train_path", "test_path", "key_path", "glove_path")


@dataclass
class RunConfig:
    """Everything a CLI command needs: data paths, hyperparameters, variant, output dir."""
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    key_path: Optional[str] = None
    glove_path: Optional[str] = None
    output_dir: str = Config.OUTPUT_DIR
    variant: str = "standard"
    threads: int = Config.THREADS
    hp: HyperParams = field(default_factory=lambda: HyperParams(seed=Config.SEED))

    @property
    def seed(self) -> int:
        return self.hp.seed

    @classmethod
    def load(cls, config_path: Optional[str] = None, overrides: Optional[Dict[str, object]] = None) -> "RunConfig":
        """
        Build a RunConfig.

        Precedence (highest first): CLI overrides, config file, environment, defaults.

        Args:
            config_path: Flat key-value file (dotenv syntax); keys are case-insensitive
            overrides: Values already parsed from the command line (None entries ignored)

        Returns:
            Validated RunConfig
        """
        values: Dict[str, object] = {k: v for k, v in Config.get_data_paths().items() if v}

        if config_path:
            if not os.path.exists(config_path):
                raise ConfigError(f"Config file not found: {config_path}")
            for key, value in dotenv_values(config_path).items():
                if value is None:
                    continue
                values[key.strip().lower()] = value

        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value

        config = cls()
        hp_changes = {}
        for key, value in values.items():
            if key in HYPERPARAM_FIELDS:
                template = getattr(config.hp, key)
                hp_changes[key] = value if type(value) is type(template) else _coerce(value, template)
            elif key in PATH_KEYS or key == "variant":
                setattr(config, key, str(value))
            elif key in ("output_dir", "out"):
                config.output_dir = str(value)
            elif key == "threads":
                config.threads = _coerce(value, 1)
            else:
                raise ConfigError(f"Unknown configuration key: {key}")

        config.hp = replace(config.hp, **hp_changes).validate()
        if config.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {config.threads}")
        return config

    def validate(self, required: tuple = ()) -> "RunConfig":
        """Check that every required path is set and exists."""
        for key in required:
            path = getattr(self, key)
            if not path:
                raise ConfigError(f"{key} is required for this command")
            if not Path(path).exists():
                raise ConfigError(f"{key} does not exist: {path}")
        return self
