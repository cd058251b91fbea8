"""Writes so4_smooth.json: A(t) = g K g^-1 + g' g^-1 with g = exp(phi(t) X) periodic and K a
constant Cartan element with rotation numbers (0.23, 0.11), so the monodromy is exp(K)."""
import json
import numpy as np
from scipy.linalg import expm

K_SAMPLES = 512
A = (0.23, 0.11)

K = np.zeros((4, 4))
for j, a in enumerate(A):
    K[2 * j + 1, 2 * j] = 2 * np.pi * a
    K[2 * j, 2 * j + 1] = -2 * np.pi * a
X = np.array([[0, 1, 0.5, 0], [-1, 0, 0, 0.3], [-0.5, 0, 0, 1], [0, -0.3, -1, 0]], dtype=float)

samples = []
for k in range(K_SAMPLES):
    t = k / K_SAMPLES
    phi = 0.4 * np.sin(2 * np.pi * t)
    dphi = 0.8 * np.pi * np.cos(2 * np.pi * t)
    g = expm(phi * X)
    a = g @ K @ g.T + dphi * X
    a = 0.5 * (a - a.T)
    samples.append([[float(x), 0.0] for x in a.reshape(-1)])

with open("so4_smooth.json", "w") as f:
    json.dump({"n": 4, "algebra": "so", "rotation_numbers": list(A), "samples": samples}, f)
