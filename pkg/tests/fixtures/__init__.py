# tests/fixtures/__init__.py
"""
Construtores compartilhados pelos testes: redes mínimas, ambientes de brinquedo
e configurações de treino curtas.
"""

from __future__ import annotations

import numpy as np

from envs.base import EnvBase
from networks import ArchConfig, ArchVariant, build_network
from params import ParamStore


# ─────────────────────────────────────────────────────────────
# REDES
# ─────────────────────────────────────────────────────────────

def rede_minima(variant: ArchVariant, forma=(1, 5, 5), n_actions: int = 3, seed: int = 0,
                dtype=np.float64, conv_channels: int = 2, hidden: int = 8):
    """Rede de mesa pequena registrada num armazém novo. Retorna (net, store)."""
    store = ParamStore()
    cfg = ArchConfig(input_shape=forma, n_actions=n_actions, conv_channels=conv_channels, hidden=hidden)
    net = build_network(variant, cfg, store, np.random.default_rng(seed), dtype=dtype)
    return net, store


def obs_catch(linha: int, coluna: int, raquete: int, n: int = 5) -> np.ndarray:
    plano = np.zeros((1, n, n), dtype=np.float32)
    plano[0, linha, coluna] = 1.0
    plano[0, n - 1, raquete] = 1.0
    return plano


# ─────────────────────────────────────────────────────────────
# AMBIENTES DE BRINQUEDO
# ─────────────────────────────────────────────────────────────

class Bandit(EnvBase):
    """
    Bandido de um passo: observação fixa (1, 0), ação 1 paga +1, ação 0 paga 0.
    Q*(s, 1) = 1 e Q*(s, 0) = 0 para qualquer γ.
    """

    env_id = "bandit"
    n_actions = 2
    observation_shape = (2,)

    def _estado_inicial(self):
        return "s"

    def _transicao(self, estado, acao):
        return "fim", float(acao == 1), True

    def _observar(self, estado) -> np.ndarray:
        return np.array([1.0, 0.0] if estado == "s" else [0.0, 1.0], dtype=np.float32)


class Corredor(EnvBase):
    """
    Corredor de 3 células one-hot; DIREITA (1) avança, ESQUERDA (0) fica.
    Chegar à última célula paga +1 e termina.
    """

    env_id = "corredor"
    n_actions = 2
    observation_shape = (3,)
    enumeravel = True

    def _estado_inicial(self):
        return 0

    def _transicao(self, estado, acao):
        novo = min(estado + acao, 2)
        return novo, float(novo == 2), novo == 2

    def _observar(self, estado) -> np.ndarray:
        return self._one_hot(estado, 3)


# ─────────────────────────────────────────────────────────────
# CONFIGURAÇÕES CURTAS
# ─────────────────────────────────────────────────────────────

def pares_curtos(algo: str, saida, **extra) -> dict:
    """Sobrescritas planas de um run curto no catch (ou gridworld para tabulares)."""
    pares = {
        "algo": algo,
        "env": "gridworld4x4" if algo in ("q-learning", "double-q") else "catch",
        "seed": 3,
        "epochs": 2,
        "steps_per_epoch": 60,
        "output_dir": str(saida),
        "arch.conv_channels": 2,
        "arch.hidden": 8,
        "a3c.worker_count": 1,
        "a3c.deterministic": True,
        "dqn.learn_start": 10,
        "dqn.batch_size": 4,
    }
    pares.update(extra)
    return pares
