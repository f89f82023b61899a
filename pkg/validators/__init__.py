from validators.config_validator import RunConfigValidator
from validators.identity_validator import IdentityValidator

__all__ = ['RunConfigValidator', 'IdentityValidator']
