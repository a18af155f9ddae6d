"""
dqn.py
Deep Q-learning com replay de experiência.

Sem rede-alvo separada: os mesmos parâmetros atuais avaliam o max do alvo
  y = r                          (s' terminal)
  y = r + γ · max_a' Q(s', a')   (caso contrário)
e os alvos entram no gradiente como constantes.

Um passo de ambiente por passo de treino, a partir de `learn_start`.
"""

from __future__ import annotations

import json
import logging
import queue
from typing import Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from erros import InsufficientDataError, UsageError
from envs import Transition
from metrics import ResumoEpoca, drenar_eventos
from networks import Network, backward, forward, forward_cached, greedy_action
from params import AdamState, ParamStore

logger = logging.getLogger(__name__)


class DqnConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(0.99, ge=0.0, le=1.0)
    batch_size: int = Field(32, ge=1)
    buffer_capacity: int = Field(10_000, ge=1)
    epsilon_start: float = Field(1.0, ge=0.0, le=1.0)
    epsilon_end: float = Field(0.1, ge=0.0, le=1.0)
    epsilon_decay_steps: int = Field(10_000, ge=1)
    learn_start: int = Field(500, ge=1)
    seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _epsilon_decrescente(self):
        if self.epsilon_end > self.epsilon_start:
            raise ValueError(f"epsilon_end ({self.epsilon_end}) maior que epsilon_start ({self.epsilon_start})")
        return self


class ReplayBuffer:
    """Anel de capacidade fixa; cheio, cada push descarta a transição mais antiga."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise UsageError(f"Capacidade do replay deve ser positiva: {capacity}")
        self.capacity = capacity
        self._itens: list[Transition] = []
        self._proximo = 0

    def push(self, t: Transition) -> None:
        if len(self._itens) < self.capacity:
            self._itens.append(t)
        else:
            self._itens[self._proximo] = t
        self._proximo = (self._proximo + 1) % self.capacity

    def sample(self, k: int, rng: np.random.Generator) -> list[Transition]:
        """k sorteios uniformes com reposição."""
        if len(self._itens) < k:
            raise InsufficientDataError(f"Replay com {len(self._itens)} transições; pedidas {k}")
        return [self._itens[i] for i in rng.integers(0, len(self._itens), size=k)]

    def contents(self) -> list[Transition]:
        """Transições da mais antiga para a mais nova."""
        if len(self._itens) < self.capacity:
            return list(self._itens)
        return self._itens[self._proximo:] + self._itens[:self._proximo]

    def __len__(self) -> int:
        return len(self._itens)

    def exportar(self) -> tuple[dict[str, str], dict[str, np.ndarray]]:
        """
        Conteúdo na ordem interna do anel, para que os mesmos índices
        sorteados apontem para as mesmas transições depois de restaurar.

        Recompensas vão em JSON: float32 não preserva as contínuas.
        """
        meta = {
            "replay.proximo": str(self._proximo),
            "replay.r": json.dumps([t.reward for t in self._itens]),
        }
        if not self._itens:
            return meta, {}
        tensores = {
            "replay.s": np.stack([t.state for t in self._itens]),
            "replay.s2": np.stack([t.next_state for t in self._itens]),
            "replay.a": np.array([t.action for t in self._itens], dtype=np.float32),
            "replay.terminal": np.array([t.terminal for t in self._itens], dtype=np.float32),
        }
        return meta, tensores

    @classmethod
    def importar(cls, capacity: int, meta: Mapping[str, str], tensores: Mapping[str, np.ndarray]) -> "ReplayBuffer":
        buf = cls(capacity)
        recompensas = json.loads(meta["replay.r"])
        if len(recompensas) > capacity:
            raise UsageError(f"Replay salvo com {len(recompensas)} transições; capacidade {capacity}")
        if recompensas:
            s, s2 = tensores["replay.s"], tensores["replay.s2"]
            acoes, terminais = tensores["replay.a"], tensores["replay.terminal"]
            if not (len(s) == len(s2) == len(acoes) == len(terminais) == len(recompensas)):
                raise UsageError("Replay salvo com tamanhos inconsistentes")
            buf._itens = [
                Transition(s[i], int(acoes[i]), float(recompensas[i]), s2[i], bool(terminais[i]))
                for i in range(len(recompensas))
            ]
        buf._proximo = int(meta["replay.proximo"])
        return buf


def buffer_push(buf: ReplayBuffer, t: Transition) -> ReplayBuffer:
    buf.push(t)
    return buf


def buffer_sample(buf: ReplayBuffer, k: int, rng: np.random.Generator) -> list[Transition]:
    return buf.sample(k, rng)


# ═══════════════════════════════════════════════════════════════
# ALVO E PERDA
# ═══════════════════════════════════════════════════════════════

def _checar_variante(net: Network) -> None:
    if net.variant.politica:
        raise UsageError(f"Rede {net.variant.value} não produz valores Q")


def dqn_target(t: Transition, params: Mapping[str, np.ndarray], net: Network, gamma: float) -> float:
    _checar_variante(net)
    if t.terminal or gamma == 0.0:
        return float(t.reward)
    q_prox = forward(net, params, t.next_state).q_values
    return float(t.reward + gamma * float(np.max(q_prox)))


def targets_do_lote(batch: Sequence[Transition], params, net: Network, gamma: float) -> np.ndarray:
    return np.array([dqn_target(t, params, net, gamma) for t in batch], dtype=np.float64)


def dqn_loss_and_grads(batch: Sequence[Transition], params: Mapping[str, np.ndarray], net: Network,
                       gamma: float, targets: np.ndarray | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """
    Perda média (y − Q(s, a))² do lote e seu gradiente.

    `targets` permite fixar os alvos de fora; sem eles, são calculados
    com os próprios `params` antes de qualquer backward.
    """
    _checar_variante(net)
    if not batch:
        raise InsufficientDataError("Lote vazio")
    if targets is None:
        targets = targets_do_lote(batch, params, net, gamma)
    if len(targets) != len(batch):
        raise UsageError(f"{len(targets)} alvos para {len(batch)} transições")

    b = len(batch)
    perda = 0.0
    grads: dict[str, np.ndarray] = {}
    for t, y in zip(batch, targets):
        saida, cache = forward_cached(net, params, t.state)
        erro = float(y) - float(saida.q_values[t.action])
        perda += erro * erro / b
        g_q = np.zeros_like(saida.q_values)
        g_q[t.action] = -2.0 * erro / b
        for nome, g in backward(net, cache, {"q": g_q}).items():
            grads[nome] = grads[nome] + g if nome in grads else g
    return perda, grads


def dqn_train_step(buf: ReplayBuffer, store: ParamStore, opt: AdamState, net: Network,
                   cfg: DqnConfig, rng: np.random.Generator) -> float:
    minimo = max(cfg.batch_size, cfg.learn_start)
    if len(buf) < minimo:
        raise InsufficientDataError(f"Replay com {len(buf)} transições; treino começa com {minimo}")
    lote = buf.sample(cfg.batch_size, rng)
    params, _ = store.snapshot()
    perda, grads = dqn_loss_and_grads(lote, params, net, cfg.gamma)
    store.apply_delta(opt, grads)
    return perda


def epsilon_at(step: int, cfg: DqnConfig) -> float:
    fracao = min(step / cfg.epsilon_decay_steps, 1.0)
    return cfg.epsilon_start + fracao * (cfg.epsilon_end - cfg.epsilon_start)


# ═══════════════════════════════════════════════════════════════
# LAÇO DE TREINO
# ═══════════════════════════════════════════════════════════════

class DqnRunner:
    """
    Ator único: um ambiente, um replay, o armazém global.

    Cada passo: ação ϵ-gulosa → push no replay → (após learn_start) um
    passo de treino. Episódios e perdas vão para a fila de eventos.
    """

    def __init__(self, cfg: DqnConfig, net: Network, store: ParamStore, opt: AdamState, env,
                 passos_iniciais: int = 0):
        self.cfg = cfg
        self.net = net
        self.store = store
        self.opt = opt
        self.env = env
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.passos = passos_iniciais
        self.eventos: queue.Queue = queue.Queue()
        self._rng = np.random.default_rng([cfg.seed, passos_iniciais])
        self._obs = env.reset(seed=cfg.seed + passos_iniciais)
        self._retorno = 0.0

    def passo(self) -> None:
        params, _ = self.store.snapshot()
        eps = epsilon_at(self.passos, self.cfg)
        if self._rng.random() < eps:
            acao = int(self._rng.integers(self.env.n_actions))
        else:
            acao = greedy_action(forward(self.net, params, self._obs).q_values)

        r = self.env.step(acao)
        self.buffer.push(Transition(self._obs, acao, r.reward, r.observation, r.terminal))
        self._retorno += r.reward
        self.passos += 1

        if len(self.buffer) >= max(self.cfg.batch_size, self.cfg.learn_start):
            perda = dqn_train_step(self.buffer, self.store, self.opt, self.net, self.cfg, self._rng)
            self.eventos.put(("perda", None, perda))

        if r.terminal:
            self.eventos.put(("episodio", self._retorno))
            self._obs, self._retorno = self.env.reset(), 0.0
        else:
            self._obs = r.observation

    def rodar_epoca(self, epoca: int, passos: int) -> ResumoEpoca:
        for _ in range(passos):
            self.passo()
        return drenar_eventos(self.eventos)

    # ─── Retomada ────────────────────────────────────────────

    def exportar_estado(self) -> tuple[dict[str, str], dict[str, np.ndarray]]:
        """
        Tudo de que o próximo passo depende além dos parâmetros e do Adam:
        replay, gerador de exploração e amostragem, episódio em curso.
        """
        meta_replay, tensores = self.buffer.exportar()
        meta = {
            "dqn.rng": json.dumps(self._rng.bit_generator.state),
            "dqn.env": json.dumps(self.env.exportar_estado()),
            "dqn.retorno": repr(self._retorno),
            **{f"dqn.{k}": v for k, v in meta_replay.items()},
        }
        return meta, {"obs": self._obs, **tensores}

    def importar_estado(self, meta: Mapping[str, str], tensores: Mapping[str, np.ndarray]) -> None:
        faltando = [k for k in CHAVES_ESTADO if k not in meta]
        if faltando or "obs" not in tensores:
            raise UsageError(f"Estado do DQN incompleto: faltam {faltando or ['obs']}")
        meta_replay = {k[len("dqn."):]: v for k, v in meta.items() if k.startswith("dqn.replay.")}
        self.buffer = ReplayBuffer.importar(self.cfg.buffer_capacity, meta_replay, tensores)
        self._rng = np.random.default_rng()
        self._rng.bit_generator.state = json.loads(meta["dqn.rng"])
        self._obs = np.array(tensores["obs"], dtype=np.float32)
        self.env.importar_estado(json.loads(meta["dqn.env"]), self._obs)
        self._retorno = float(meta["dqn.retorno"])
        logger.info(f"[dqn] estado restaurado: replay com {len(self.buffer)} transições, T={self.passos}")


CHAVES_ESTADO = ("dqn.rng", "dqn.env", "dqn.retorno", "dqn.replay.proximo", "dqn.replay.r")
