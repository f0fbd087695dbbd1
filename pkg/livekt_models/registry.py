# livekt_models/registry.py
#

'''
Name -> predictor lookup used by the command line and config files
'''

# Import packages
import logging

from livekt_models.gbdt import GBDTPredictor, SklearnHGBPredictor
from livekt_models.logistic import LogisticRegressionPredictor
from livekt_models.minipfn import MiniPFNPredictor
from livekt_models.predictor import ConstantPredictor, MajorityPredictor

logger = logging.getLogger(__name__)

PREDICTORS = {
    cls.name: cls for cls in (MajorityPredictor, ConstantPredictor,
                              LogisticRegressionPredictor, GBDTPredictor,
                              SklearnHGBPredictor, MiniPFNPredictor)
}


class UnknownModelError(KeyError):
    def __str__(self):
        return 'unknown model {0!r}; choose from {1}'.format(
            self.args[0], ', '.join(sorted(PREDICTORS)))


def parse_model_list(text):
    '''
    Function to split a comma separated model list, rejecting unknown
    and repeated names
    '''
    names = [name.strip() for name in text.split(',') if name.strip()]
    if not names:
        raise ValueError('no models given')
    for name in names:
        if name not in PREDICTORS:
            raise UnknownModelError(name)
    if len(set(names)) != len(names):
        raise ValueError('model list {0!r} repeats a name'.format(text))
    return names


def build_predictor(name, seed=0, weights_path=None, **overrides):
    '''
    Function to instantiate a predictor by registry name

    Parameters
    ----------
    :type name: str
    :param name: one of PREDICTORS
    :type seed: int
    :param seed: (optional), default=0
    :type weights_path: str
    :param weights_path: (optional), default=None
        MiniPFN weights file; ignored by other models
    :param overrides: hyperparameters passed to the model constructor

    Returns
    -------
    :return: predictor : livekt_models.predictor.Predictor
    '''
    try:
        cls = PREDICTORS[name]
    except KeyError:
        raise UnknownModelError(name)
    if cls is MiniPFNPredictor:
        # the network shape comes from the weights file
        if overrides:
            raise ValueError('minipfn takes no hyperparameters, got {0}; '
                             'set the weights file instead'.format(
                                 ', '.join(sorted(overrides))))
        return cls(weights_path=weights_path, seed=seed)
    try:
        return cls(seed=seed, **overrides)
    except TypeError as exc:
        raise ValueError('bad hyperparameters for {0}: {1}'.format(name,
                                                                  exc))
