"""
a3c.py
Família ator-crítico assíncrona: A3C, Double A3C e LS Double A3C.

Cada worker repete o ciclo:
  1. sync_worker:           θ' ← θ, acumuladores zerados
  2. choose_value_head:     (variantes duplas) sorteia V1 ou V2 para o segmento
  3. collect_rollout:       até t_max passos com a política local
  4. bootstrap_return:      0 se terminal; senão V(s_t), ou V da OUTRA cabeça
  5. compute_returns:       R ← r_i + γR, de trás para frente
  6. accumulate_gradients:  −log π(a|s)·A + (R − V)², com A constante
  7. async_apply:           um passo Adam atômico no armazém global, T += L

O contador global T é dividido em épocas; cada worker reserva passos do
orçamento da época antes de coletar, então toda época termina exatamente
em época × steps_per_epoch.

Modo determinístico: workers em rodízio numa única thread, uma iteração por
vez. Modo com threads: um `threading.Thread` por worker.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass, field
from typing import Iterator, Literal, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from erros import TrainingAbort, UsageError
from envs import EnvSpec, make_env
from layers import log_softmax
from metrics import ResumoEpoca, drenar_eventos
from networks import (
    ArchVariant, Network, action_sample, backward, exclusive_head_params,
    forward, forward_cached,
)
from params import AdamState, ParamStore, zeros_like_params

logger = logging.getLogger(__name__)


class A3cConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(0.99, ge=0.0, le=1.0)
    t_max: int = Field(5, ge=1)
    worker_count: int = Field(3, ge=1)
    total_steps: int = Field(18_000, ge=1)
    steps_per_epoch: int = Field(6000, ge=1)
    variant: ArchVariant = ArchVariant.VANILLA_A3C
    seed: int = Field(0, ge=0)
    entropy_beta: float = Field(0.0, ge=0.0)
    # força a cabeça atualizada E a do bootstrap (checagem de redução)
    force_head: Literal[1, 2] | None = None
    deterministic: bool = False


@dataclass
class RolloutSegment:
    states: list[np.ndarray]
    actions: list[int]
    rewards: list[float]
    terminal: bool
    final_state: np.ndarray | None = None

    def __post_init__(self):
        if not (len(self.states) == len(self.actions) == len(self.rewards)):
            raise UsageError(
                f"Segmento desalinhado: {len(self.states)} estados, "
                f"{len(self.actions)} ações, {len(self.rewards)} recompensas"
            )
        if not self.states:
            raise UsageError("Segmento vazio")
        if self.terminal == (self.final_state is not None):
            raise UsageError("final_state deve existir exatamente quando o segmento não é terminal")

    @property
    def length(self) -> int:
        return len(self.states)


@dataclass
class WorkerState:
    worker_id: int
    env: object
    rng: np.random.Generator
    params: dict[str, np.ndarray] = field(default_factory=dict)
    version: int = 0
    grads: dict[str, np.ndarray] = field(default_factory=dict)
    obs: np.ndarray | None = None
    retorno: float = 0.0
    passos: int = 0
    contribuicao: int = 0
    cabecas: list[int] = field(default_factory=list)
    cabecas_bootstrap: list[int] = field(default_factory=list)
    eventos: queue.Queue | None = None


@dataclass
class PerdaSegmento:
    policy_loss: float
    value_loss: float
    entropy_loss: float
    grads: dict[str, np.ndarray]


# ═══════════════════════════════════════════════════════════════
# OPERAÇÕES DO WORKER
# ═══════════════════════════════════════════════════════════════

def sync_worker(w: WorkerState, store: ParamStore) -> WorkerState:
    w.params, w.version = store.snapshot()
    w.grads = zeros_like_params(w.params)
    return w


def collect_rollout(w: WorkerState, net: Network, t_max: int, limite: int | None = None) -> RolloutSegment:
    """
    Até t_max passos (ou `limite`, se menor) com a política do snapshot local.

    Um segmento terminal deixa o worker sem observação; o próximo rollout
    começa um episódio novo.
    """
    passos = t_max if limite is None else min(t_max, limite)
    if passos < 1:
        raise UsageError(f"Rollout com orçamento {passos}")
    if w.obs is None:
        w.obs, w.retorno = w.env.reset(), 0.0

    estados, acoes, recompensas = [], [], []
    terminal = False
    for _ in range(passos):
        politica = forward(net, w.params, w.obs).policy
        acao = action_sample(politica, w.rng)
        r = w.env.step(acao)
        estados.append(w.obs)
        acoes.append(acao)
        recompensas.append(r.reward)
        w.retorno += r.reward
        w.passos += 1
        w.obs = r.observation
        if r.terminal:
            terminal = True
            if w.eventos is not None:
                w.eventos.put(("episodio", w.retorno))
            break

    final = None if terminal else w.obs
    if terminal:
        w.obs = None
    return RolloutSegment(estados, acoes, recompensas, terminal, final)


def choose_value_head(rng: np.random.Generator, variant: ArchVariant = ArchVariant.DOUBLE_A3C) -> int:
    if not ArchVariant(variant).duas_cabecas:
        raise UsageError(f"Variante {ArchVariant(variant).value} tem uma única cabeça de valor")
    return 1 if rng.random() < 0.5 else 2


def bootstrap_return(seg: RolloutSegment, w: WorkerState, net: Network, variant: ArchVariant,
                     chosen_head: int | None = None, bootstrap_head: int | None = None) -> float:
    """
    R inicial da recursão. Nas variantes duplas quem avalia s_t é a cabeça
    oposta à atualizada, a menos que `bootstrap_head` diga outra coisa.
    """
    variant = ArchVariant(variant)
    if variant.duas_cabecas:
        if chosen_head not in (1, 2):
            raise UsageError(f"Variante {variant.value} exige a cabeça escolhida (1 ou 2)")
        cabeca = bootstrap_head if bootstrap_head is not None else 3 - chosen_head
    else:
        if chosen_head is not None:
            raise UsageError(f"Variante {variant.value} não escolhe cabeça")
        cabeca = 1

    if seg.terminal:
        return 0.0
    if seg.final_state is None:
        raise UsageError("Segmento não terminal sem final_state")
    return forward(net, w.params, seg.final_state).value(cabeca)


def compute_returns(seg: RolloutSegment, R0: float, gamma: float) -> list[float]:
    retornos = [0.0] * seg.length
    R = R0
    for i in reversed(range(seg.length)):
        R = seg.rewards[i] + gamma * R
        retornos[i] = R
    return retornos


def a3c_segment_loss_and_grads(net: Network, params: Mapping[str, np.ndarray], seg: RolloutSegment,
                               returns: Sequence[float], chosen_head: int | None = None,
                               advantages: Sequence[float] | None = None,
                               entropy_beta: float = 0.0) -> PerdaSegmento:
    """
    Perda somada do segmento e seus gradientes:
      Σ_i  −log π(a_i|s_i)·A_i + (R_i − V(s_i))² − β·H(π(·|s_i))

    A_i = R_i − V(s_i) entra como constante. `advantages` congela os A_i em
    valores externos (checagem de gradiente, testes de independência).
    """
    if len(returns) != seg.length:
        raise UsageError(f"{len(returns)} retornos para segmento de {seg.length} passos")
    if advantages is not None and len(advantages) != seg.length:
        raise UsageError(f"{len(advantages)} vantagens para segmento de {seg.length} passos")
    if not net.variant.politica:
        raise UsageError(f"Rede {net.variant.value} não tem política")
    cabeca = chosen_head or 1
    nome_valor = net.value_activation(cabeca)

    perda_pi = perda_v = perda_h = 0.0
    grads: dict[str, np.ndarray] = {}
    for i, (s, a, R) in enumerate(zip(seg.states, seg.actions, returns)):
        saida, cache = forward_cached(net, params, s)
        v = saida.value(cabeca)
        vantagem = (R - v) if advantages is None else float(advantages[i])
        log_pi = log_softmax(saida.logits)
        pi = saida.policy

        perda_pi += -float(log_pi[a]) * vantagem
        perda_v += (R - v) ** 2

        g_logits = pi * vantagem
        g_logits[a] -= vantagem
        if entropy_beta > 0.0:
            entropia = -float(np.dot(pi, log_pi))
            perda_h += -entropy_beta * entropia
            g_logits = g_logits + entropy_beta * pi * (log_pi + entropia)

        g_v = np.array([-2.0 * (R - v)], dtype=saida.logits.dtype)
        for nome, g in backward(net, cache, {"logits": g_logits, nome_valor: g_v}).items():
            grads[nome] = grads[nome] + g if nome in grads else g

    return PerdaSegmento(perda_pi, perda_v, perda_h, grads)


def accumulate_gradients(w: WorkerState, seg: RolloutSegment, returns: Sequence[float], net: Network,
                         variant: ArchVariant, chosen_head: int | None = None,
                         entropy_beta: float = 0.0, advantages: Sequence[float] | None = None) -> PerdaSegmento:
    if ArchVariant(variant) is not net.variant:
        raise UsageError(f"Variante {ArchVariant(variant).value} diferente da rede {net.variant.value}")
    perda = a3c_segment_loss_and_grads(net, w.params, seg, returns, chosen_head, advantages, entropy_beta)
    for nome, g in perda.grads.items():
        w.grads[nome] = w.grads[nome] + g if nome in w.grads else g
    return perda


def async_apply(w: WorkerState, store: ParamStore, opt: AdamState, net: Network, seg: RolloutSegment,
                chosen_head: int | None = None, contador: "ContadorGlobal | None" = None,
                reservado: int | None = None) -> int:
    """Envia os acumuladores num único apply_delta; a cabeça não escolhida fica de fora."""
    excluidos = set()
    if net.variant.duas_cabecas and chosen_head is not None:
        excluidos = set(exclusive_head_params(net, 3 - chosen_head))
    delta = {k: g for k, g in w.grads.items() if k not in excluidos}
    versao = store.apply_delta(opt, delta)
    w.contribuicao += seg.length
    if contador is not None:
        contador.concluir(seg.length if reservado is None else reservado, seg.length)
    return versao


# ═══════════════════════════════════════════════════════════════
# CONTADOR GLOBAL T
# ═══════════════════════════════════════════════════════════════

class ContadorGlobal:
    """
    T global com orçamento por época.

    reservar(n) devolve até n passos livres do orçamento, ou 0 quando a
    época está fechada (tudo consumido e nenhuma reserva pendente).
    concluir(reservado, usado) devolve a sobra e soma o uso a T.
    """

    def __init__(self, T: int = 0):
        self.T = T
        self._limite = T
        self._pendente = 0
        self._abortado = False
        self._cond = threading.Condition()

    def abrir_epoca(self, limite: int) -> None:
        with self._cond:
            self._limite = limite
            self._cond.notify_all()

    def reservar(self, n: int) -> int:
        with self._cond:
            while True:
                if self._abortado:
                    return 0
                livre = self._limite - self.T - self._pendente
                if livre > 0:
                    b = min(n, livre)
                    self._pendente += b
                    return b
                if self._pendente == 0:
                    return 0
                self._cond.wait()

    def concluir(self, reservado: int, usado: int) -> None:
        with self._cond:
            self._pendente -= reservado
            self.T += usado
            self._cond.notify_all()

    def abortar(self) -> None:
        with self._cond:
            self._abortado = True
            self._cond.notify_all()


# ═══════════════════════════════════════════════════════════════
# TREINO
# ═══════════════════════════════════════════════════════════════

class A3cTrainer:

    def __init__(self, cfg: A3cConfig, net: Network, store: ParamStore, opt: AdamState,
                 envspec: EnvSpec, T_inicial: int = 0):
        if net.variant is not cfg.variant:
            raise UsageError(f"Rede {net.variant.value} não corresponde à variante {cfg.variant.value}")
        if cfg.force_head is not None and not cfg.variant.duas_cabecas:
            raise UsageError("force_head só vale para variantes com duas cabeças")
        self.cfg = cfg
        self.net = net
        self.store = store
        self.opt = opt
        self.contador = ContadorGlobal(T_inicial)
        self.eventos: queue.Queue = queue.Queue()
        self.workers = [
            WorkerState(
                worker_id=i,
                env=make_env(envspec.model_copy(update={"seed": envspec.seed + i})),
                rng=np.random.default_rng(cfg.seed + i),
                eventos=self.eventos,
            )
            for i in range(cfg.worker_count)
        ]

    @property
    def T(self) -> int:
        return self.contador.T

    def _escolher_cabeca(self, w: WorkerState) -> int | None:
        if not self.cfg.variant.duas_cabecas:
            return None
        if self.cfg.force_head is not None:
            return self.cfg.force_head
        return choose_value_head(w.rng, self.cfg.variant)

    def iteracao(self, w: WorkerState) -> bool:
        """Uma iteração externa completa do worker. False quando a época fechou."""
        reserva = self.contador.reservar(self.cfg.t_max)
        if reserva == 0:
            return False
        try:
            sync_worker(w, self.store)
            cabeca = self._escolher_cabeca(w)
            seg = collect_rollout(w, self.net, self.cfg.t_max, limite=reserva)
            R0 = bootstrap_return(seg, w, self.net, self.cfg.variant, cabeca, bootstrap_head=self.cfg.force_head)
            if cabeca is not None:
                w.cabecas.append(cabeca)
                w.cabecas_bootstrap.append(self.cfg.force_head or 3 - cabeca)
            retornos = compute_returns(seg, R0, self.cfg.gamma)
            perda = accumulate_gradients(w, seg, retornos, self.net, self.cfg.variant, cabeca,
                                         self.cfg.entropy_beta)
            async_apply(w, self.store, self.opt, self.net, seg, cabeca, self.contador, reserva)
        except BaseException:
            self.contador.concluir(reserva, 0)
            raise
        self.eventos.put(("perda", perda.policy_loss / seg.length, perda.value_loss / seg.length))
        return True

    def _preparar_epoca(self, epoca: int) -> None:
        for w in self.workers:
            w.rng = np.random.default_rng([self.cfg.seed + w.worker_id, epoca])
            w.obs = w.env.reset(seed=int(w.rng.integers(2**31)))
            w.retorno = 0.0

    def _rodar_threads(self) -> None:
        falhas: list[tuple[int, BaseException]] = []

        def alvo(w: WorkerState):
            try:
                while self.iteracao(w):
                    pass
            except BaseException as e:
                falhas.append((w.worker_id, e))
                self.contador.abortar()

        threads = [threading.Thread(target=alvo, args=(w,), name=f"worker-{w.worker_id}") for w in self.workers]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if falhas:
            worker_id, erro = falhas[0]
            logger.error(f"[a3c] worker {worker_id} abortou: {type(erro).__name__}: {erro}")
            raise TrainingAbort(f"worker {worker_id} falhou: {erro}") from erro

    def _rodar_rodizio(self) -> None:
        ativos = list(self.workers)
        while ativos:
            for w in list(ativos):
                try:
                    continua = self.iteracao(w)
                except Exception as e:
                    logger.error(f"[a3c] worker {w.worker_id} abortou: {type(e).__name__}: {e}")
                    raise TrainingAbort(f"worker {w.worker_id} falhou: {e}") from e
                if not continua:
                    ativos.remove(w)

    def rodar_epoca(self, epoca: int) -> ResumoEpoca:
        limite = min(epoca * self.cfg.steps_per_epoch, self.cfg.total_steps)
        self._preparar_epoca(epoca)
        self.contador.abrir_epoca(limite)
        if self.cfg.deterministic or self.cfg.worker_count == 1:
            self._rodar_rodizio()
        else:
            self._rodar_threads()
        return drenar_eventos(self.eventos)


def run_training(cfg: A3cConfig, store: ParamStore, net: Network, envspec: EnvSpec,
                 opt: AdamState | None = None, epoca_inicial: int = 0,
                 T_inicial: int | None = None) -> Iterator[tuple[int, int, ResumoEpoca]]:
    """
    Treina até T atingir cfg.total_steps, gerando (época, T, resumo) ao fim de cada época.

    Para retomar de checkpoint, passe a época já concluída e o T salvo.
    """
    opt = opt or AdamState()
    T0 = epoca_inicial * cfg.steps_per_epoch if T_inicial is None else T_inicial
    trainer = A3cTrainer(cfg, net, store, opt, envspec, T0)
    epoca = epoca_inicial
    while trainer.T < cfg.total_steps:
        epoca += 1
        resumo = trainer.rodar_epoca(epoca)
        yield epoca, trainer.T, resumo
