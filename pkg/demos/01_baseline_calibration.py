"""Simulate one turntable scenario and calibrate it with the closed-form baseline.

The gyro sits on a turntable spinning at 78 deg/s, first z-up and then z-down.
Averaging each recording and combining the two means gives scale and bias.
Longer windows average away more noise.
"""

from gyrocal import GyroErrorTerms, calibrate_scenario, default_noise_sigma, generate_scenario

fs = 145.0
truth = GyroErrorTerms(scale=0.00388, bias=-0.03073, noise_sigma=default_noise_sigma(fs))
scenario = generate_scenario(78.0, 70.0, fs, truth, rng_seed=1, scenario_id="demo")

print(f"true scale {truth.scale:.5f}, true bias {truth.bias:.5f} deg/s, "
      f"noise sigma {truth.noise_sigma:.4f} deg/s")
print(f"{'window [s]':>10} {'scale':>10} {'bias':>10} {'|d scale|':>10} {'|d bias|':>10}")
for window in (2, 4, 6, 17, 70):
    res = calibrate_scenario(scenario, window)
    print(f"{window:>10} {res.scale:>10.5f} {res.bias:>10.5f} "
          f"{abs(res.scale - truth.scale):>10.2e} {abs(res.bias - truth.bias):>10.2e}")
