"""
envs/gridworld.py
Gridworld determinístico N×N (padrão 4×4) para testes de oráculo.

Características:
  - Início em (0,0), objetivo em (N-1,N-1), terminal ao entrar no objetivo (+1)
  - Ações {norte, sul, leste, oeste}; movimento para fora da grade não faz nada
  - Recompensa 0 por passo; limite de passos (padrão 100) encerra com recompensa 0
  - Observação: one-hot de tamanho N², índice = linha·N + coluna
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .base import EnvBase

NORTE, SUL, LESTE, OESTE = 0, 1, 2, 3
NOMES_ACOES = ("north", "south", "east", "west")

_DESLOCAMENTOS = {
    NORTE: (-1, 0),
    SUL:   (1, 0),
    LESTE: (0, 1),
    OESTE: (0, -1),
}


class GridworldParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    size: int = Field(4, ge=2)
    step_cap: int = Field(100, ge=1)


class Gridworld(EnvBase):

    env_id = "gridworld4x4"
    enumeravel = True
    n_actions = 4

    def __init__(self, seed: int = 0, size: int = 4, step_cap: int = 100):
        super().__init__(seed)
        self.size = size
        self.step_cap = step_cap
        self.objetivo = (size - 1, size - 1)
        self.observation_shape = (size * size,)

    def _estado_inicial(self):
        return (0, 0)

    def _mover(self, estado, acao):
        dl, dc = _DESLOCAMENTOS[acao]
        linha, coluna = estado[0] + dl, estado[1] + dc
        if not (0 <= linha < self.size and 0 <= coluna < self.size):
            return estado
        return (linha, coluna)

    def _transicao(self, estado, acao):
        novo = self._mover(estado, acao)
        if novo == self.objetivo:
            return novo, 1.0, True
        # O limite conta o passo atual (self.passos ainda não foi incrementado)
        if self.passos + 1 >= self.step_cap:
            return novo, 0.0, True
        return novo, 0.0, False

    def _observar(self, estado) -> np.ndarray:
        return self._one_hot(estado[0] * self.size + estado[1], self.size * self.size)

    # ─── Oráculo ──────────────────────────────────────────────

    def estados(self):
        return [(l, c) for l in range(self.size) for c in range(self.size)]

    def modelo(self, estado, acao):
        # O limite de passos não faz parte do estado; o oráculo o ignora
        novo = self._mover(estado, acao)
        if novo == self.objetivo:
            return [(1.0, novo, 1.0, True)]
        return [(1.0, novo, 0.0, False)]

    def e_terminal(self, estado) -> bool:
        return estado == self.objetivo
