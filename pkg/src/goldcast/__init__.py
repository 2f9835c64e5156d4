"""Gold price forecasting with stacked LSTMs, MLP fusion and grey-wolf architecture search."""

from .errors import ConfigError, DataError, GoldcastError, NumericError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "GoldcastError", "NumericError", "__version__"]
