# livekt_eval/config.py
#

'''
Experiment manifests: an INI file with an [experiment] section and
optional [model:<name>] sections of hyperparameter overrides, e.g.

    [experiment]
    data = data/poj.lktd
    models = majority,lr,gbdt,minipfn
    T = 5,10,15,20
    split_seed = 7
    out = results/poj
    weights = weights/minipfn.lktw
    emit = json,csv,svg

    [model:lr]
    epochs = 5
    warm_start = true

Command line flags override values read from the file.
'''

# Import packages
import configparser
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from livekt_eval.live_eval import LiveSchedule
from livekt_eval.report import EMIT_CHOICES
from livekt_models.registry import UnknownModelError, parse_model_list

logger = logging.getLogger(__name__)

EXPERIMENT_SECTION = 'experiment'
MODEL_SECTION_PREFIX = 'model:'
EXPERIMENT_KEYS = ('data', 'models', 'T', 'split_ratio', 'split_seed',
                   'seed', 'out', 'weights', 'emit', 'upload', 'creds')


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    data: Optional[str] = None
    models: List[str] = field(default_factory=lambda: ['majority'])
    model_overrides: Dict[str, dict] = field(default_factory=dict)
    schedule: LiveSchedule = field(default_factory=LiveSchedule)
    split_ratio: float = 0.8
    split_seed: int = 0
    seed: int = 0
    out: str = 'results'
    weights: Optional[str] = None
    emit: Tuple[str, ...] = ('json', 'csv')
    upload: Optional[str] = None
    creds: Optional[str] = None

    def validate(self):
        '''
        Check that referenced files exist and values are usable; raises
        ConfigError
        '''
        if not self.data:
            raise ConfigError('no dataset given (--data)')
        if not os.path.exists(self.data):
            raise ConfigError('dataset not found: {0}'.format(self.data))
        if self.weights and not os.path.exists(self.weights):
            raise ConfigError('weights file not found: {0}'.format(
                self.weights))
        if self.creds and not os.path.exists(self.creds):
            raise ConfigError('credentials file not found: {0}'.format(
                self.creds))
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError('split_ratio must lie in (0, 1), got '
                              '{0}'.format(self.split_ratio))
        bad = set(self.emit) - set(EMIT_CHOICES)
        if bad:
            raise ConfigError('unknown emit format(s) {0}; choose from '
                              '{1}'.format(', '.join(sorted(bad)),
                                           ', '.join(EMIT_CHOICES)))
        for name in self.model_overrides:
            if name not in self.models:
                logger.warning('Overrides for %s are ignored: model not '
                               'selected', name)
        return self


def coerce_value(text):
    '''
    Convert an INI value to bool, int or float when it reads as one
    '''
    lowered = text.strip().lower()
    if lowered in ('true', 'yes', 'on'):
        return True
    if lowered in ('false', 'no', 'off'):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip()


def _apply(config, key, value):
    '''
    Set one [experiment] key (string form) on config
    '''
    try:
        if key == 'models':
            config.models = parse_model_list(value)
        elif key == 'T':
            config.schedule = LiveSchedule.parse(value)
        elif key == 'split_ratio':
            config.split_ratio = float(value)
        elif key in ('split_seed', 'seed'):
            setattr(config, key, int(value))
        elif key == 'emit':
            config.emit = tuple(tok.strip() for tok in str(value).split(',')
                                if tok.strip())
        elif key in ('data', 'out', 'weights', 'upload', 'creds'):
            setattr(config, key, value or None)
        else:
            raise ConfigError('unknown experiment key {0!r}; valid keys: '
                              '{1}'.format(key, ', '.join(EXPERIMENT_KEYS)))
    except UnknownModelError as exc:
        raise ConfigError(str(exc))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError('bad value for {0}: {1}'.format(key, exc))


def load_config(path=None, overrides=None):
    '''
    Function to build an ExperimentConfig from an optional INI file and
    flag overrides

    Parameters
    ----------
    :type path: str
    :param path: (optional), default=None
        INI manifest
    :type overrides: dict
    :param overrides: (optional), default=None
        experiment keys to values (strings or numbers); None values are
        skipped

    Returns
    -------
    :return: config : ExperimentConfig
        not yet validated
    '''

    config = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            with open(path) as f_in:
                parser.read_file(f_in)
        except (OSError, configparser.Error) as exc:
            raise ConfigError('cannot read config {0}: {1}'.format(path,
                                                                  exc))
        for section in parser.sections():
            if section == EXPERIMENT_SECTION:
                for key, value in parser.items(section):
                    _apply(config, key, value)
            elif section.startswith(MODEL_SECTION_PREFIX):
                name = section[len(MODEL_SECTION_PREFIX):].strip()
                config.model_overrides[name] = {
                    key: coerce_value(value)
                    for key, value in parser.items(section)}
            else:
                raise ConfigError('unknown config section [{0}]'.format(
                    section))

    for key, value in (overrides or {}).items():
        if value is not None:
            _apply(config, key, str(value))
    return config
