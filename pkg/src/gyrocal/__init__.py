"""Gyroscope z-axis turntable calibration: simulator, closed-form baseline,
multi-head CNN calibrator and evaluation metrics."""

from .calibration import (CalibrationResult, Method, SixPositionInput, baseline_ae_curve,
                          calibrate_scenario, calibrate_single_axis, calibrate_six_position,
                          mean_window)
from .evaluation import (EvalReport, absolute_error, conv_time_improvement, evaluate,
                         improvement_pct, t_conv)
from .pipeline import (DataPoint, DatasetSplit, build_synthetic_corpus, label_scenario,
                       segment_scenario, split_train_val, window_segment)
from .sensor_model import (GyroErrorTerms, Orientation, Recording, Scenario, apply_error_model,
                           default_noise_sigma, generate_scenario, sample_error_terms)

__version__ = "0.1.0"
