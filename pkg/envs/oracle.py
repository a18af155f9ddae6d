"""
envs/oracle.py
Oráculo exato de iteração de valor para ambientes enumeráveis.

Usado pelos testes tabulares: V* e Q* resolvidos até o ponto fixo de Bellman
com resíduo abaixo de 1e-10.
"""

from __future__ import annotations

import logging

import numpy as np

from erros import NonEnumerableEnvError
from .base import EnvSpec

logger = logging.getLogger(__name__)

_TOLERANCIA = 1e-12
_MAX_ITERACOES = 100_000


def _ambiente_enumeravel(spec: EnvSpec):
    from . import make_env

    env = make_env(spec)
    if not getattr(env, "enumeravel", False):
        raise NonEnumerableEnvError(f"Ambiente '{spec.env_id}' não tem espaço de estados enumerável")
    return env


def _valor_acao(env, v: dict, estado, acao: int, gamma: float) -> float:
    total = 0.0
    for prob, prox, recompensa, terminal in env.modelo(estado, acao):
        futuro = 0.0 if terminal else gamma * v[prox]
        total += prob * (recompensa + futuro)
    return total


def optimal_state_values(spec: EnvSpec, gamma: float) -> dict:
    """
    Resolve V* por iteração de valor (Gauss-Seidel).

    Estados terminais ficam com valor 0. A iteração para quando a maior
    variação de uma varredura fica abaixo de 1e-12.
    """
    env = _ambiente_enumeravel(spec)
    estados = env.estados()
    v = {s: 0.0 for s in estados}

    for iteracao in range(_MAX_ITERACOES):
        delta = 0.0
        for s in estados:
            if env.e_terminal(s):
                continue
            novo = max(_valor_acao(env, v, s, a, gamma) for a in range(env.n_actions))
            delta = max(delta, abs(novo - v[s]))
            v[s] = novo
        if delta < _TOLERANCIA:
            logger.debug(f"[oraculo] {spec.env_id}: convergiu em {iteracao + 1} varreduras")
            break
    else:
        logger.warning(f"[oraculo] {spec.env_id}: limite de {_MAX_ITERACOES} varreduras atingido")

    return v


def optimal_q_values(spec: EnvSpec, gamma: float) -> np.ndarray:
    """Q*(s,a) = E[r + γ·V*(s')], linhas na ordem de `estados()` (índice da observação one-hot)."""
    env = _ambiente_enumeravel(spec)
    v = optimal_state_values(spec, gamma)
    estados = env.estados()
    q = np.zeros((len(estados), env.n_actions), dtype=np.float64)
    for i, s in enumerate(estados):
        if env.e_terminal(s):
            continue
        for a in range(env.n_actions):
            q[i, a] = _valor_acao(env, v, s, a, gamma)
    return q


def bellman_residual(spec: EnvSpec, v: dict, gamma: float) -> float:
    """max_s |V(s) − max_a E[r + γ·V(s')]| sobre os estados não terminais."""
    env = _ambiente_enumeravel(spec)
    residuo = 0.0
    for s in env.estados():
        if env.e_terminal(s):
            continue
        melhor = max(_valor_acao(env, v, s, a, gamma) for a in range(env.n_actions))
        residuo = max(residuo, abs(v[s] - melhor))
    return residuo
