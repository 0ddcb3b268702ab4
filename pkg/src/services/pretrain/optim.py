import logging

import numpy as np
from src.exceptions import NonFiniteError
from src.schemas.pretrain.models import AdamState
from src.services.nets.parameters import ParameterSet

logger = logging.getLogger(__name__)


def adam_step(params: ParameterSet, state: AdamState, lr: float) -> AdamState:
    """
    One Adam update with bias correction, applied in place to every parameter from its ``grad``.

    Returns:
        The advanced optimizer state

    Raises:
        NonFiniteError: when any gradient holds NaN or Inf; no parameter is touched
    """
    bad = [param.name for param in params if not np.all(np.isfinite(param.grad))]
    if bad:
        logger.error(f"Non-finite gradients at step {state.step + 1}: {bad}")
        raise NonFiniteError(f"non-finite gradient in {', '.join(bad)} at optimizer step {state.step + 1}")

    step = state.step + 1
    m, v = {}, {}
    correction1 = 1.0 - state.beta1**step
    correction2 = 1.0 - state.beta2**step
    for param in params:
        m_prev = state.m.get(param.name, np.zeros_like(param.value))
        v_prev = state.v.get(param.name, np.zeros_like(param.value))
        m[param.name] = state.beta1 * m_prev + (1.0 - state.beta1) * param.grad
        v[param.name] = state.beta2 * v_prev + (1.0 - state.beta2) * param.grad**2
        update = lr * (m[param.name] / correction1) / (np.sqrt(v[param.name] / correction2) + state.eps)
        param.value = param.value - update
    return state.model_copy(update={"step": step, "m": m, "v": v})
