"""
params.py
Armazém global de parâmetros e otimizador Adam.

O ParamStore é o único objeto mutável compartilhado entre workers:
  - snapshot():     cópia profunda consistente + versão, sob o lock
  - apply_delta():  um passo Adam atômico contra o armazém, versão +1

O estado do Adam vive junto do armazém; workers enviam gradientes brutos.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from erros import NonFiniteError, ShapeError, UsageError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def hiperparametros(self) -> dict[str, float]:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


class ParamStore:

    def __init__(self):
        self._entradas: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        self.version = 0

    # ─────────────────────────────────────────────────────────
    # Registro e leitura
    # ─────────────────────────────────────────────────────────

    def register(self, nome: str, tensor: np.ndarray) -> None:
        with self._lock:
            if nome in self._entradas:
                raise UsageError(f"Parâmetro '{nome}' já registrado")
            self._entradas[nome] = np.array(tensor, copy=True)

    def names(self) -> list[str]:
        return list(self._entradas)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self._entradas.items()}

    def parameter_count(self, prefixo: str = "") -> int:
        return sum(v.size for k, v in self._entradas.items() if k.startswith(prefixo))

    def __contains__(self, nome: str) -> bool:
        return nome in self._entradas

    def __len__(self) -> int:
        return len(self._entradas)

    def snapshot(self) -> tuple[dict[str, np.ndarray], int]:
        """Cópia de todos os tensores, consistente com uma única versão."""
        with self._lock:
            return {k: v.copy() for k, v in self._entradas.items()}, self.version

    # ─────────────────────────────────────────────────────────
    # Escrita
    # ─────────────────────────────────────────────────────────

    def apply_delta(self, opt: AdamState, grads: Mapping[str, np.ndarray]) -> int:
        with self._lock:
            adam_step(opt, self._entradas, grads)
            self.version += 1
            return self.version

    def load(self, tensores: Mapping[str, np.ndarray], version: int = 0) -> None:
        """Substitui os valores (mesmos nomes e formatos). Usado ao retomar de checkpoint."""
        with self._lock:
            faltando = set(self._entradas) ^ set(tensores)
            if faltando:
                raise UsageError(f"Conjunto de parâmetros diferente do registrado: {sorted(faltando)}")
            for nome, valor in tensores.items():
                atual = self._entradas[nome]
                if valor.shape != atual.shape:
                    raise ShapeError(nome, atual.shape, valor.shape)
                self._entradas[nome] = np.array(valor, dtype=atual.dtype, copy=True)
            self.version = version

    def astype(self, dtype) -> None:
        with self._lock:
            self._entradas = {k: v.astype(dtype) for k, v in self._entradas.items()}

    def __repr__(self) -> str:
        return f"<ParamStore tensores={len(self._entradas)} versao={self.version}>"


def _validar_gradientes(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
    for nome, g in grads.items():
        if nome not in params:
            raise UsageError(f"Gradiente para parâmetro desconhecido: '{nome}'")
        if g.shape != params[nome].shape:
            raise ShapeError(f"gradiente {nome}", params[nome].shape, g.shape)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"Gradiente não finito em '{nome}'")


def adam_step(opt: AdamState, params: ParamStore | dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
    """
    Um passo Adam com correção de viés, in-place.

    Só os parâmetros presentes em `grads` mudam (e só os seus momentos).
    Tudo é validado antes de qualquer escrita, então um erro não deixa
    o armazém parcialmente atualizado.
    """
    tensores = params._entradas if isinstance(params, ParamStore) else params
    _validar_gradientes(tensores, grads)

    opt.step += 1
    correcao1 = 1.0 - opt.beta1 ** opt.step
    correcao2 = 1.0 - opt.beta2 ** opt.step

    for nome, g in grads.items():
        theta = tensores[nome]
        if nome not in opt.m:
            opt.m[nome] = np.zeros_like(theta)
            opt.v[nome] = np.zeros_like(theta)
        m, v = opt.m[nome], opt.v[nome]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)

        m_hat = m / correcao1
        v_hat = v / correcao2
        theta -= (opt.lr * m_hat / (np.sqrt(v_hat) + opt.eps)).astype(theta.dtype, copy=False)


def zeros_like_params(params: Mapping[str, np.ndarray], nomes: Iterable[str] | None = None) -> dict[str, np.ndarray]:
    nomes = params.keys() if nomes is None else nomes
    return {k: np.zeros_like(params[k]) for k in nomes}
