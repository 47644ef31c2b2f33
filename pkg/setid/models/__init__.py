from .base import ModelSpec, PointEstimate
from .hj import HJModel, hj_phi
from .interval_mean import GaussianIntervalModel, IntervalMeanModel
from .interval_regression import IntervalRegressionModel
from .missing_data import BetaPrior, MissingDataModel
