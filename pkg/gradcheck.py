"""
gradcheck.py
Checagem de gradientes por diferenças finitas centrais (64 bits).

Erro relativo por entrada: |analítico − numérico| / max(|analítico|, |numérico|, 1e-8).
O resultado de uma checagem é o máximo sobre todas as entradas de todos os
parâmetros (e da entrada, quando pedido).

run_suite() cobre cada tipo de camada, cada variante de rede e os dois
objetivos completos (erro quadrático do DQN e perda política+valor do A3C
com vantagem congelada). É o que o subcomando `gradcheck` executa.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from erros import NonFiniteError
from layers import (
    RELU, SOFTMAX, LayerSpec, conv2d, fully_connected, init_params,
    layer_backward, layer_forward, maxpool2d,
)

logger = logging.getLogger(__name__)

PASSO = 1e-5
LIMIAR = 1e-4

PerdaEGrads = Callable[[dict[str, np.ndarray]], tuple[float, Mapping[str, np.ndarray]]]


@dataclass(frozen=True)
class ResultadoCheck:
    nome: str
    erro: float
    limiar: float = LIMIAR

    @property
    def ok(self) -> bool:
        return self.erro < self.limiar


def numeric_gradient(f: Callable[[], float], tensor: np.ndarray, h: float = PASSO) -> np.ndarray:
    """Derivada central de f() em relação a cada entrada de `tensor` (perturbado in-place)."""
    grad = np.zeros_like(tensor, dtype=np.float64)
    for idx in np.ndindex(tensor.shape):
        original = tensor[idx]
        tensor[idx] = original + h
        mais = f()
        tensor[idx] = original - h
        menos = f()
        tensor[idx] = original
        grad[idx] = (mais - menos) / (2 * h)
    return grad


def relative_error(analitico: np.ndarray, numerico: np.ndarray) -> float:
    analitico = np.asarray(analitico, dtype=np.float64)
    numerico = np.asarray(numerico, dtype=np.float64)
    if analitico.size == 0:
        return 0.0
    if not (np.all(np.isfinite(analitico)) and np.all(np.isfinite(numerico))):
        raise NonFiniteError("Gradiente não finito durante a checagem")
    escala = np.maximum(np.maximum(np.abs(analitico), np.abs(numerico)), 1e-8)
    return float(np.max(np.abs(analitico - numerico) / escala))


def check_objective(perda_e_grads: PerdaEGrads, params: Mapping[str, np.ndarray], h: float = PASSO) -> float:
    """
    Compara os gradientes analíticos de um objetivo escalar com diferenças finitas.

    Parâmetros sem gradiente analítico contam como gradiente zero.
    """
    params64 = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    _, analiticos = perda_e_grads(params64)
    pior = 0.0
    for nome, tensor in params64.items():
        numerico = numeric_gradient(lambda: float(perda_e_grads(params64)[0]), tensor, h)
        analitico = analiticos.get(nome, np.zeros_like(tensor))
        pior = max(pior, relative_error(analitico, numerico))
    return pior


def gradient_check(camadas: Sequence[tuple[str | None, LayerSpec]], params: Mapping[str, np.ndarray],
                   x: np.ndarray, rng: np.random.Generator, check_input: bool = False,
                   h: float = PASSO) -> float:
    """
    Checa uma pilha de camadas com cabeça de perda linear fixa: L = Σ c ⊙ saída.

    `params` usa nomes "<prefixo>.w" / "<prefixo>.b". Uma pilha sem parâmetros
    resulta em 0 a menos que `check_input` peça também o gradiente da entrada.
    """
    x64 = np.array(x, dtype=np.float64)
    params64 = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def propagar():
        caches, y = [], x64
        for prefixo, spec in camadas:
            p = {} if prefixo is None else {"w": params64[f"{prefixo}.w"], "b": params64[f"{prefixo}.b"]}
            y, c = layer_forward(spec, p, y)
            caches.append(c)
        return y, caches

    y, _ = propagar()
    coef = rng.standard_normal(y.shape)

    def perda() -> float:
        return float(np.sum(coef * propagar()[0]))

    _, caches = propagar()
    g = coef
    analiticos: dict[str, np.ndarray] = {}
    for (prefixo, spec), c in zip(reversed(camadas), reversed(caches)):
        g, pg = layer_backward(spec, c, g)
        if prefixo is not None:
            for k, v in pg.items():
                analiticos[f"{prefixo}.{k}"] = v

    pior = 0.0
    for nome, tensor in params64.items():
        pior = max(pior, relative_error(analiticos[nome], numeric_gradient(perda, tensor, h)))
    if check_input:
        pior = max(pior, relative_error(g, numeric_gradient(perda, x64, h)))
    return pior


# ═══════════════════════════════════════════════════════════════
# SUÍTE COMPLETA
# ═══════════════════════════════════════════════════════════════

def _entrada_espacada(rng: np.random.Generator, forma: tuple[int, ...]) -> np.ndarray:
    """Valores distintos e longe de zero: sem empates no pooling nem dobras da relu."""
    n = int(np.prod(forma))
    valores = (rng.permutation(n) + 1) * (1.0 / n) * rng.choice([-1.0, 1.0], size=n)
    return valores.reshape(forma)


def _checks_de_camada(rng: np.random.Generator) -> list[ResultadoCheck]:
    resultados = []

    def pilha(nome, camadas, forma, check_input=False):
        params = {}
        for prefixo, spec in camadas:
            if prefixo is not None:
                for k, v in init_params(spec, rng, np.float64).items():
                    params[f"{prefixo}.{k}"] = v + rng.uniform(-0.1, 0.1, size=v.shape)
        x = _entrada_espacada(rng, forma)
        resultados.append(ResultadoCheck(nome, gradient_check(camadas, params, x, rng, check_input)))

    pilha("conv2d", [("c", conv2d(2, 3, 3))], (2, 5, 5), check_input=True)
    pilha("conv2d passo 2", [("c", conv2d(1, 2, (3, 2), stride=2))], (1, 7, 6), check_input=True)
    pilha("maxpool2d", [(None, maxpool2d(2))], (2, 5, 4), check_input=True)
    pilha("fully_connected", [("f", fully_connected(12, 4))], (3, 4), check_input=True)
    pilha("relu", [(None, RELU)], (10,), check_input=True)
    pilha("softmax", [(None, SOFTMAX)], (5,), check_input=True)
    pilha("conv → relu → fc → softmax",
          [("c", conv2d(1, 2, 2)), (None, RELU), ("f", fully_connected(18, 3)), (None, SOFTMAX)],
          (1, 4, 4))
    return resultados


def _rede_minima(variant, forma=(1, 4, 4), n_actions=3, seed=0):
    from networks import ArchConfig, build_network
    from params import ParamStore

    store = ParamStore()
    cfg = ArchConfig(input_shape=forma, n_actions=n_actions, conv_channels=2, hidden=4)
    net = build_network(variant, cfg, store, np.random.default_rng(seed), dtype=np.float64)
    params, _ = store.snapshot()
    return net, params


def _checks_de_rede(rng: np.random.Generator) -> list[ResultadoCheck]:
    from networks import ArchVariant, backward, forward_cached

    casos = [(v, f) for v in ArchVariant for f in ((1, 4, 4), (6,))]
    # quatro planos colocam um maxpool no tronco
    casos.append((ArchVariant.VANILLA_A3C, (4, 4, 4)))

    resultados = []
    for variant, forma in casos:
        net, params = _rede_minima(variant, forma)
        obs = rng.uniform(0, 1, size=forma)
        _, cache = forward_cached(net, params, obs)
        saidas = ["q"] if not variant.politica else ["pi", *net.value_names()]
        coefs = {s: rng.standard_normal(cache.ativacoes[s].shape) for s in saidas}

        def perda_e_grads(p, net=net, obs=obs, coefs=coefs):
            _, c = forward_cached(net, p, obs)
            perda = sum(float(np.sum(coefs[s] * c.ativacoes[s])) for s in coefs)
            return perda, backward(net, c, coefs)

        nome = f"rede {variant.value} entrada {forma}"
        resultados.append(ResultadoCheck(nome, check_objective(perda_e_grads, params)))
    return resultados


def _checks_de_objetivo(rng: np.random.Generator) -> list[ResultadoCheck]:
    from a3c import RolloutSegment, a3c_segment_loss_and_grads, compute_returns
    from dqn import dqn_loss_and_grads, targets_do_lote
    from envs import Transition
    from networks import ArchVariant

    resultados = []

    net, params = _rede_minima(ArchVariant.DQN)
    lote = [
        Transition(rng.uniform(0, 1, (1, 4, 4)), int(rng.integers(3)), float(rng.normal()),
                   rng.uniform(0, 1, (1, 4, 4)), bool(i % 2))
        for i in range(4)
    ]
    alvos = targets_do_lote(lote, params, net, 0.9)
    resultados.append(ResultadoCheck(
        "objetivo DQN (alvos constantes)",
        check_objective(lambda p: dqn_loss_and_grads(lote, p, net, 0.9, targets=alvos), params),
    ))

    for variant, cabeca in ((ArchVariant.VANILLA_A3C, None), (ArchVariant.DOUBLE_A3C, 2),
                            (ArchVariant.LS_DOUBLE_A3C, 1)):
        net, params = _rede_minima(variant)
        seg = RolloutSegment(
            states=[rng.uniform(0, 1, (1, 4, 4)) for _ in range(3)],
            actions=[int(a) for a in rng.integers(3, size=3)],
            rewards=[float(r) for r in rng.normal(size=3)],
            terminal=True,
        )
        retornos = compute_returns(seg, 0.0, 0.9)
        vantagens = [float(v) for v in rng.normal(size=3)]

        def perda_e_grads(p, net=net, seg=seg, retornos=retornos, cabeca=cabeca, vantagens=vantagens):
            r = a3c_segment_loss_and_grads(net, p, seg, retornos, cabeca, advantages=vantagens,
                                           entropy_beta=0.01)
            return r.policy_loss + r.value_loss + r.entropy_loss, r.grads

        resultados.append(ResultadoCheck(
            f"objetivo A3C {variant.value} (vantagem congelada)",
            check_objective(perda_e_grads, params),
        ))
    return resultados


def run_suite(seed: int = 0) -> list[ResultadoCheck]:
    rng = np.random.default_rng(seed)
    inicio = time.monotonic()
    resultados = _checks_de_camada(rng) + _checks_de_rede(rng) + _checks_de_objetivo(rng)
    falhas = [r for r in resultados if not r.ok]
    logger.info(
        f"[gradcheck] {len(resultados)} checagens, {len(falhas)} falha(s) "
        f"em {time.monotonic() - inicio:.1f}s"
    )
    for r in falhas:
        logger.warning(f"[gradcheck] FALHOU {r.nome}: erro relativo {r.erro:.3e}")
    return resultados
