"""
envs/base.py
Classe base abstrata para todos os ambientes de mesa.

Cada ambiente concreto (gridworld, MDP de superestimação, catch) deve herdar
de EnvBase e implementar `_estado_inicial`, `_transicao` e `_observar`.
Ambientes com espaço de estados enumerável também implementam `estados` e
`modelo`, consumidos pelo oráculo de iteração de valor.

Métodos utilitários compartilhados:
  - reset / step:     contrato de episódio (validação de ação, step após terminal)
  - _one_hot:         codificação de estado tabular
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Hashable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from erros import UsageError


class EnvSpec(BaseModel):
    """Seleção de ambiente: id, semente e sobrescritas de parâmetros."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    env_id: str
    seed: int = Field(0, ge=0)
    params: dict[str, Any] = Field(default_factory=dict)


@dataclass(frozen=True)
class StepResult:
    observation: np.ndarray
    reward: float
    terminal: bool


@dataclass(frozen=True)
class Transition:
    """Uma tupla (s, a, r, s', terminal): unidade do replay e dos rollouts."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool

    def __post_init__(self):
        if self.state.shape != self.next_state.shape:
            raise UsageError(
                f"Transição com formatos distintos: {self.state.shape} vs {self.next_state.shape}"
            )


class EnvBase(ABC):
    """
    Interface comum para todos os ambientes.

    Atributos que cada subclasse deve definir:
        env_id            (str): identificador do catálogo, ex: "catch"
        n_actions         (int): número de ações
        observation_shape (tuple): formato da observação
        enumeravel        (bool): True se `estados`/`modelo` estão disponíveis
    """

    env_id: str = "base"
    enumeravel: bool = False

    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)
        self._estado: Hashable | None = None
        self._terminal = False
        self._ativo = False
        self.passos = 0

    n_actions: int
    observation_shape: tuple[int, ...]

    # ─────────────────────────────────────────────────────────
    # Métodos abstratos: obrigatórios em cada subclasse
    # ─────────────────────────────────────────────────────────

    @abstractmethod
    def _estado_inicial(self) -> Hashable:
        """Sorteia (ou fixa) o estado inicial usando self._rng."""

    @abstractmethod
    def _transicao(self, estado: Hashable, acao: int) -> tuple[Hashable, float, bool]:
        """Dinâmica amostrada: retorna (próximo estado, recompensa, terminal)."""

    @abstractmethod
    def _observar(self, estado: Hashable) -> np.ndarray:
        """Codifica o estado como observação (float32)."""

    # ─────────────────────────────────────────────────────────
    # Contrato de episódio
    # ─────────────────────────────────────────────────────────

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.passos = 0
        self._terminal = False
        self._ativo = True
        self._estado = self._estado_inicial()
        return self._observar(self._estado)

    def step(self, action: int) -> StepResult:
        if not self._ativo:
            raise UsageError(f"{self.env_id}: step chamado antes de reset")
        if self._terminal:
            raise UsageError(f"{self.env_id}: step após estado terminal; chame reset")
        acao = int(action)
        if not 0 <= acao < self.n_actions:
            raise UsageError(f"{self.env_id}: ação {acao} fora da faixa [0, {self.n_actions})")

        self._estado, recompensa, terminal = self._transicao(self._estado, acao)
        self.passos += 1
        self._terminal = terminal
        return StepResult(self._observar(self._estado), float(recompensa), bool(terminal))

    @property
    def estado(self) -> Hashable | None:
        return self._estado

    # ─────────────────────────────────────────────────────────
    # Retomada
    # ─────────────────────────────────────────────────────────

    def exportar_estado(self) -> dict:
        """Episódio em curso e gerador, em forma serializável como JSON."""
        return {
            "rng": self._rng.bit_generator.state,
            "estado": self._estado,
            "passos": self.passos,
            "terminal": self._terminal,
            "ativo": self._ativo,
        }

    def importar_estado(self, salvo: dict, obs: np.ndarray | None = None) -> None:
        """Inverso de `exportar_estado`; `obs` só interessa a embrulhos como FrameStack."""
        self._rng = np.random.default_rng()
        self._rng.bit_generator.state = salvo["rng"]
        self._estado = _como_tupla(salvo["estado"])
        self.passos = int(salvo["passos"])
        self._terminal = bool(salvo["terminal"])
        self._ativo = bool(salvo["ativo"])

    # ─────────────────────────────────────────────────────────
    # Espaço enumerável (oráculo)
    # ─────────────────────────────────────────────────────────

    def estados(self) -> list[Hashable]:
        """Lista todos os estados; para ambientes one-hot, a posição é o índice da observação."""
        raise UsageError(f"{self.env_id}: espaço de estados não enumerável")

    def modelo(self, estado: Hashable, acao: int) -> list[tuple[float, Hashable, float, bool]]:
        """Dinâmica esperada: lista de (probabilidade, próximo, recompensa média, terminal)."""
        raise UsageError(f"{self.env_id}: modelo de transição indisponível")

    def e_terminal(self, estado: Hashable) -> bool:
        return False

    # ─────────────────────────────────────────────────────────
    # Utilitários protegidos
    # ─────────────────────────────────────────────────────────

    @staticmethod
    def _one_hot(indice: int, tamanho: int) -> np.ndarray:
        obs = np.zeros(tamanho, dtype=np.float32)
        obs[indice] = 1.0
        return obs

    def __repr__(self) -> str:
        return f"<Env id='{self.env_id}' acoes={self.n_actions} obs={self.observation_shape}>"


def _como_tupla(valor):
    # JSON devolve tuplas como listas; estados precisam ser hasheáveis
    if isinstance(valor, list):
        return tuple(_como_tupla(v) for v in valor)
    return valor
