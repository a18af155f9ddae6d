"""
envs/catch.py
Jogo "catch" em pixels: menor jogo que exercita o caminho convolucional.

  - Grade N×N (padrão 5×5), um único plano, valores em {0, 1}
  - Bola começa na linha 0, coluna sorteada; cai uma linha por passo
  - Raquete de 1 pixel começa no centro da última linha
  - Ações {esquerda, parado, direita}, limitadas às bordas
  - Quando a bola chega à última linha: +1 se a coluna coincide, senão -1; terminal
  - Todo episódio dura exatamente N-1 passos
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .base import EnvBase

ESQUERDA, PARADO, DIREITA = 0, 1, 2


class CatchParams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    size: int = Field(5, ge=3)
    frame_stack: int = Field(1, ge=1)


class Catch(EnvBase):

    env_id = "catch"
    enumeravel = True
    n_actions = 3

    def __init__(self, seed: int = 0, size: int = 5):
        super().__init__(seed)
        self.size = size
        self.observation_shape = (1, size, size)

    def _estado_inicial(self):
        coluna = int(self._rng.integers(self.size))
        return (0, coluna, self.size // 2)

    def _avancar(self, estado, acao):
        linha, coluna, raquete = estado
        raquete = min(max(raquete + acao - 1, 0), self.size - 1)
        linha += 1
        if linha == self.size - 1:
            recompensa = 1.0 if raquete == coluna else -1.0
            return (linha, coluna, raquete), recompensa, True
        return (linha, coluna, raquete), 0.0, False

    def _transicao(self, estado, acao):
        return self._avancar(estado, acao)

    def _observar(self, estado) -> np.ndarray:
        linha, coluna, raquete = estado
        plano = np.zeros((1, self.size, self.size), dtype=np.float32)
        plano[0, linha, coluna] = 1.0
        plano[0, self.size - 1, raquete] = 1.0
        return plano

    # ─── Oráculo ──────────────────────────────────────────────

    def estados(self):
        return [
            (l, c, r)
            for l in range(self.size)
            for c in range(self.size)
            for r in range(self.size)
        ]

    def modelo(self, estado, acao):
        novo, recompensa, terminal = self._avancar(estado, acao)
        return [(1.0, novo, recompensa, terminal)]

    def e_terminal(self, estado) -> bool:
        return estado[0] == self.size - 1


def politica_otima(obs: np.ndarray) -> int:
    """Política de referência: move a raquete em direção à coluna da bola."""
    plano = obs[-1]
    n = plano.shape[0]
    linhas_bola = np.nonzero(plano[: n - 1].any(axis=1))[0]
    raquete = int(np.argmax(plano[n - 1]))
    if linhas_bola.size == 0:
        return PARADO
    coluna = int(np.argmax(plano[linhas_bola[0]]))
    if coluna < raquete:
        return ESQUERDA
    if coluna > raquete:
        return DIREITA
    return PARADO
