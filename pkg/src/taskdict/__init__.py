"""Task-driven dictionary learning.

Sparse codes are elastic-net solutions ``alpha*(x, D)``; dictionaries, task
parameters and optional linear transforms are trained jointly by projected
stochastic gradient descent on a supervised loss of those codes.
"""

from .elastic_net import (
    ElasticNetParams,
    SparseCode,
    SingularGramError,
    ActiveSetLimitError,
    solve,
    batch_solve,
    check_kkt,
    active_closed_form,
    solve_cd,
)
from .losses import TaskLoss
from .tasks import TaskSpec, predict, make_baseline_z, overcomplete_dct
from .model import TrainedModel, OneVsAll
from .gradients import compute_beta, grad_sample, grad_batch, unsup_grad_d
from .data import SampleStream, PatchConfig
from .trainer import (
    DivergenceError,
    TrainConfig,
    train,
    fit,
    fit_one_vs_all,
    init_unsupervised,
    warm_start_w,
    continuation_schedule,
    select_rho,
)

__version__ = "0.1.0"
