"""
envs/__init__.py
Registro central de ambientes por id.
"""

from __future__ import annotations

from pydantic import ValidationError

from erros import ConfigError
from .base import EnvBase, EnvSpec, StepResult, Transition
from envs.gridworld import Gridworld, GridworldParams
from envs.overest import OverestMdp, OverestParams
from envs.catch import Catch, CatchParams
from envs.frame_stack import FrameStack
from envs.oracle import optimal_q_values, optimal_state_values

_REGISTRY: dict[str, tuple[type[EnvBase], type]] = {
    "gridworld4x4": (Gridworld, GridworldParams),
    "overest_mdp":  (OverestMdp, OverestParams),
    "catch":        (Catch, CatchParams),
}

_DESCRICOES = {
    "gridworld4x4": "Gridworld 4×4 determinístico, objetivo no canto oposto (+1)",
    "overest_mdp":  "MDP A/B com K ações ruidosas em B (viés de superestimação)",
    "catch":        "Catch 5×5 em pixels, 3 ações, episódios de 4 passos",
}


def params_do_ambiente(env_id: str, params: dict | None = None):
    """Valida as sobrescritas de parâmetros do ambiente e devolve o modelo preenchido."""
    if env_id not in _REGISTRY:
        disponiveis = ", ".join(_REGISTRY.keys())
        raise ConfigError(f"Ambiente '{env_id}' não reconhecido. Disponíveis: {disponiveis}")
    _, modelo = _REGISTRY[env_id]
    try:
        return modelo(**(params or {}))
    except ValidationError as e:
        raise ConfigError(f"Parâmetros inválidos para '{env_id}': {e}") from e


def make_env(spec: EnvSpec):
    """Constrói o ambiente em estado pré-reset. Catch com frame_stack > 1 volta embrulhado."""
    params = params_do_ambiente(spec.env_id, spec.params).model_dump()
    cls, _ = _REGISTRY[spec.env_id]
    frames = params.pop("frame_stack", 1)
    env = cls(seed=spec.seed, **params)
    if frames > 1:
        return FrameStack(env, frames)
    return env


def list_envs() -> dict[str, str]:
    """Retorna dicionário {env_id: descrição} de todos os ambientes registrados."""
    return dict(_DESCRICOES)


__all__ = [
    "EnvBase", "EnvSpec", "StepResult", "Transition", "FrameStack",
    "make_env", "list_envs", "params_do_ambiente",
    "optimal_state_values", "optimal_q_values",
]
