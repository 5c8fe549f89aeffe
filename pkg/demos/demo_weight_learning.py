#!/usr/bin/env python3
"""Walk through judge-weight learning from (synthetic) human ratings.

Simulates annotators whose preferences weight prompt compliance and data
encoding heavily, fits ridge weights to the ratings, and compares the
cross-validated correlation of learned vs uniform weights.

Run:  python demos/demo_weight_learning.py
"""

import numpy as np

from vegaeval.judge import VISION_DIMENSIONS
from vegaeval.stats import learn_weights_ridge, pearson

HIDDEN_PREFERENCES = {
    "visualization_type": 0.10,
    "data_encoding": 0.30,
    "data_transformation": 0.10,
    "aesthetics": 0.05,
    "prompt_compliance": 0.45,
}


def main():
    rng = np.random.default_rng(7)
    n = 171
    features = rng.random((n, len(VISION_DIMENSIONS)))
    hidden = np.array([HIDDEN_PREFERENCES[d] for d in VISION_DIMENSIONS])
    ratings = features @ hidden + 0.03 * rng.normal(size=n)

    fit = learn_weights_ridge(features, ratings, lam=0.1)
    print("dimension             hidden   learned")
    for (name, learned), true_value in zip(fit.weights.weights, hidden):
        print(f"{name:20s}  {true_value:.3f}    {learned:.3f}")

    print(f"\ncross-validated pearson, learned weights: {fit.cv_pearson_learned:.3f}")
    print(f"cross-validated pearson, uniform weights: {fit.cv_pearson_uniform:.3f}")
    print(f"gain from learning: {fit.cv_pearson_learned - fit.cv_pearson_uniform:+.3f}")

    uniform_scores = features.mean(axis=1)
    learned_scores = features @ np.array([w for _, w in fit.weights.weights])
    print(f"\nwhole-sample check: learned r="
          f"{pearson(learned_scores, ratings).r:.3f}, "
          f"uniform r={pearson(uniform_scores, ratings).r:.3f}")


if __name__ == "__main__":
    main()
