"""Spherical regression on n-spheres.

Constrained-gradient activations with exact Jacobians, sign-class target
decomposition, rotation algebra with the geodesic metric, and a small
manually backpropagated trainer with per-batch gradient telemetry.
"""

from .activations import (
    ActivationKind,
    grad_check,
    sexp_forward,
    sexp_jacobian,
    sflat_forward,
    sflat_jacobian,
    softmax_forward,
    softmax_jacobian,
    softmax_xent_grad,
)
from .backend import BACKEND
from .heads import (
    LossValue,
    SphereKind,
    SphereTarget,
    cosine_proximity_loss,
    decode_signs,
    encode_target,
    joint_loss,
    l2_sphere_loss,
    merge_prediction,
    sign_xent_loss,
    smooth_l1_loss,
    xent_squares_loss,
)
from .linalg import dot, fd_grad, fd_jacobian, l2_normalize, make_rng, outer
from .metrics import EvalReport, eval_normals, eval_rotation
from .network import (
    DenseLayer,
    MlpModel,
    TrainConfig,
    TrainRecord,
    load_model,
    save_model,
    sgd_step,
    train,
)
from .rotations import (
    AxisAngle,
    EulerAngles,
    GimbalLockError,
    Quaternion,
    axis_angle_to_quat,
    euler_to_matrix,
    geodesic_distance,
    load_quaternions,
    matrix_to_euler,
    matrix_to_quat,
    quat_to_axis_angle,
    quat_to_matrix,
    sample_uniform_so3,
    save_quaternions,
)

__version__ = "0.1.0"
