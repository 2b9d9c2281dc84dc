"""Normalized Radon cumulative distribution transforms.

Features of images, point clouds and rotation sets that are invariant
(or nearly so, after discretization) under affine maps or rotations,
plus the nearest-template, k-NN, SVM and k-means harness used to
evaluate them.
"""

from .cdt import QuantileGrid, cdf_eval, cdt_sample, quantile_eval, wasserstein2
from .directions import DirectionSet, equispaced_s1, fibonacci_s2, make_directions, super_fibonacci_so3
from .features import (FeatureMatrix, FeatureVector, feature_pipeline, h_reduce, normalize_family,
                       rcdt_flatten, tv_reduce)
from .measures import AffineMap, DegenerateError, GridImage, Measure1D, PointCloud, SupportError
from .radon import Slicer, project_at, project_image, project_points

__version__ = "0.1.0"
