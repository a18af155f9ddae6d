"""
envs/overest.py
MDP de dois estados que expõe o viés de superestimação do operador max.

  Estado A: ação 0 ("left")  → estado B, recompensa 0
            ação 1 ("right") → terminal, recompensa 0
            ações 2..n-1     → se comportam como "right" (preenchimento)
  Estado B: K ações, todas → terminal com recompensa ~ Normal(média, desvio)

O espaço de ações tem tamanho max(2, K). Observação: one-hot sobre {A, B, T}.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .base import EnvBase

ESTADO_A, ESTADO_B, ESTADO_T = "A", "B", "T"
_INDICE = {ESTADO_A: 0, ESTADO_B: 1, ESTADO_T: 2}

LEFT, RIGHT = 0, 1


class OverestParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(8, ge=1)
    reward_mean: float = -0.1
    reward_std: float = Field(1.0, ge=0.0)


class OverestMdp(EnvBase):

    env_id = "overest_mdp"
    enumeravel = True
    observation_shape = (3,)

    def __init__(self, seed: int = 0, k: int = 8, reward_mean: float = -0.1, reward_std: float = 1.0):
        super().__init__(seed)
        self.k = k
        self.reward_mean = reward_mean
        self.reward_std = reward_std
        self.n_actions = max(2, k)

    def _estado_inicial(self):
        return ESTADO_A

    def _transicao(self, estado, acao):
        if estado == ESTADO_A:
            if acao == LEFT:
                return ESTADO_B, 0.0, False
            return ESTADO_T, 0.0, True
        recompensa = self._rng.normal(self.reward_mean, self.reward_std)
        return ESTADO_T, float(recompensa), True

    def _observar(self, estado) -> np.ndarray:
        return self._one_hot(_INDICE[estado], 3)

    # ─── Oráculo ──────────────────────────────────────────────

    def estados(self):
        return [ESTADO_A, ESTADO_B, ESTADO_T]

    def modelo(self, estado, acao):
        if estado == ESTADO_A:
            if acao == LEFT:
                return [(1.0, ESTADO_B, 0.0, False)]
            return [(1.0, ESTADO_T, 0.0, True)]
        return [(1.0, ESTADO_T, self.reward_mean, True)]

    def e_terminal(self, estado) -> bool:
        return estado == ESTADO_T
