"""
checkpoint.py
Formato binário de checkpoint (little-endian).

Layout:
  magic      b"A3CF"
  versão     u16
  metadados  u32 n  +  n × (u16 len + chave UTF-8, u32 len + valor UTF-8)
  tensores   u32 n  +  n × (u16 len + nome UTF-8, u8 ndim, ndim × u32, payload float32)

Os momentos do Adam vão como tensores "adam.m.<nome>" / "adam.v.<nome>";
passo e hiperparâmetros do otimizador vão nos metadados. Tensores
"estado.<nome>" guardam o estado do laço de treino (replay, observação
corrente) e não são parâmetros da rede.

Toda falha de leitura vira CorruptCheckpointError com o byte onde parou.
"""

from __future__ import annotations

import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from tenacity import before_sleep_log, retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from erros import CorruptCheckpointError, UnsupportedVersionError
from params import AdamState, ParamStore

logger = logging.getLogger(__name__)

MAGIC = b"A3CF"
VERSAO = 1
_MAX_NDIM = 8

_PREFIXO_M = "adam.m."
_PREFIXO_V = "adam.v."
_PREFIXO_ESTADO = "estado."


@dataclass
class Checkpoint:
    version: int
    meta: dict[str, str] = field(default_factory=dict)
    tensores: dict[str, np.ndarray] = field(default_factory=dict)
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    estado: dict[str, np.ndarray] = field(default_factory=dict)

    def adam_state(self) -> AdamState:
        """Reconstrói o otimizador salvo (padrões quando o checkpoint não tem Adam)."""
        padrao = AdamState()
        return AdamState(
            lr=float(self.meta.get("adam.lr", padrao.lr)),
            beta1=float(self.meta.get("adam.beta1", padrao.beta1)),
            beta2=float(self.meta.get("adam.beta2", padrao.beta2)),
            eps=float(self.meta.get("adam.eps", padrao.eps)),
            step=int(self.meta.get("adam.step", 0)),
            m={k: v.copy() for k, v in self.adam_m.items()},
            v={k: v.copy() for k, v in self.adam_v.items()},
        )


# ═══════════════════════════════════════════════════════════════
# ESCRITA
# ═══════════════════════════════════════════════════════════════

def _bytes_texto(texto: str, largura: str) -> bytes:
    dados = texto.encode("utf-8")
    return struct.pack(f"<{largura}", len(dados)) + dados


def _bytes_tensor(nome: str, tensor: np.ndarray) -> bytes:
    tensor = np.ascontiguousarray(tensor, dtype="<f4")
    if tensor.ndim > _MAX_NDIM:
        raise ValueError(f"Tensor '{nome}' com {tensor.ndim} dimensões")
    partes = [
        _bytes_texto(nome, "H"),
        struct.pack("<B", tensor.ndim),
        struct.pack(f"<{tensor.ndim}I", *tensor.shape),
        tensor.tobytes(order="C"),
    ]
    return b"".join(partes)


def serializar(meta: Mapping[str, str], tensores: Mapping[str, np.ndarray], versao: int = VERSAO) -> bytes:
    partes = [MAGIC, struct.pack("<H", versao), struct.pack("<I", len(meta))]
    for chave, valor in meta.items():
        partes.append(_bytes_texto(str(chave), "H"))
        partes.append(_bytes_texto(str(valor), "I"))
    partes.append(struct.pack("<I", len(tensores)))
    for nome, tensor in tensores.items():
        partes.append(_bytes_tensor(nome, tensor))
    return b"".join(partes)


@retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=0.1, min=0.1, max=2),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    reraise=True,
)
def _gravar_atomico(caminho: Path, dados: bytes) -> None:
    caminho.parent.mkdir(parents=True, exist_ok=True)
    fd, temporario = tempfile.mkstemp(dir=caminho.parent, prefix=f".{caminho.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(dados)
        os.replace(temporario, caminho)
    except BaseException:
        Path(temporario).unlink(missing_ok=True)
        raise


def save_checkpoint(store: ParamStore | Mapping[str, np.ndarray], opt: AdamState | None,
                    meta: Mapping[str, object], caminho: Path,
                    estado: Mapping[str, np.ndarray] | None = None) -> Path:
    """Grava parâmetros, otimizador, metadados e o estado opcional do laço. Metadados viram texto."""
    caminho = Path(caminho)
    params = store.snapshot()[0] if isinstance(store, ParamStore) else dict(store)

    meta_txt = {str(k): str(v) for k, v in meta.items()}
    tensores = dict(params)
    if opt is not None:
        meta_txt.update({f"adam.{k}": repr(v) for k, v in opt.hiperparametros().items()})
        meta_txt["adam.step"] = str(opt.step)
        for nome in params:
            if nome in opt.m:
                tensores[_PREFIXO_M + nome] = opt.m[nome]
                tensores[_PREFIXO_V + nome] = opt.v[nome]
    for nome, tensor in (estado or {}).items():
        tensores[_PREFIXO_ESTADO + nome] = tensor

    _gravar_atomico(caminho, serializar(meta_txt, tensores))
    logger.info(f"[checkpoint] {len(params)} tensores salvos em {caminho}")
    return caminho


# ═══════════════════════════════════════════════════════════════
# LEITURA
# ═══════════════════════════════════════════════════════════════

class _Leitor:

    def __init__(self, dados: bytes):
        self.dados = dados
        self.pos = 0

    def ler(self, n: int, oque: str) -> bytes:
        if self.pos + n > len(self.dados):
            raise CorruptCheckpointError(f"Arquivo truncado lendo {oque}", self.pos)
        trecho = self.dados[self.pos:self.pos + n]
        self.pos += n
        return trecho

    def inteiro(self, formato: str, oque: str) -> int:
        return struct.unpack(f"<{formato}", self.ler(struct.calcsize(f"<{formato}"), oque))[0]

    def texto(self, largura: str, oque: str) -> str:
        inicio = self.pos
        n = self.inteiro(largura, oque)
        try:
            return self.ler(n, oque).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptCheckpointError(f"UTF-8 inválido em {oque}", inicio) from e


def desserializar(dados: bytes) -> Checkpoint:
    leitor = _Leitor(dados)
    if leitor.ler(4, "magic") != MAGIC:
        raise CorruptCheckpointError("Magic inválido (esperado b'A3CF')", 0)
    versao = leitor.inteiro("H", "versão")
    if versao != VERSAO:
        raise UnsupportedVersionError(versao, VERSAO)

    meta = {}
    for _ in range(leitor.inteiro("I", "contagem de metadados")):
        chave = leitor.texto("H", "chave de metadado")
        meta[chave] = leitor.texto("I", f"valor de '{chave}'")

    ckpt = Checkpoint(version=versao, meta=meta)
    for _ in range(leitor.inteiro("I", "contagem de tensores")):
        inicio = leitor.pos
        nome = leitor.texto("H", "nome de tensor")
        ndim = leitor.inteiro("B", f"ndim de '{nome}'")
        if ndim > _MAX_NDIM:
            raise CorruptCheckpointError(f"Tensor '{nome}' com ndim {ndim}", inicio)
        forma = struct.unpack(f"<{ndim}I", leitor.ler(4 * ndim, f"dimensões de '{nome}'"))
        tamanho = int(np.prod(forma, dtype=np.int64)) * 4
        payload = leitor.ler(tamanho, f"payload de '{nome}'")
        tensor = np.frombuffer(payload, dtype="<f4").reshape(forma).astype(np.float32)

        if nome.startswith(_PREFIXO_M):
            destino, chave = ckpt.adam_m, nome[len(_PREFIXO_M):]
        elif nome.startswith(_PREFIXO_V):
            destino, chave = ckpt.adam_v, nome[len(_PREFIXO_V):]
        elif nome.startswith(_PREFIXO_ESTADO):
            destino, chave = ckpt.estado, nome[len(_PREFIXO_ESTADO):]
        else:
            destino, chave = ckpt.tensores, nome
        if chave in destino:
            raise CorruptCheckpointError(f"Tensor '{nome}' duplicado", inicio)
        destino[chave] = tensor

    if leitor.pos != len(dados):
        raise CorruptCheckpointError(f"{len(dados) - leitor.pos} bytes sobrando após os tensores", leitor.pos)

    for nome, m in ckpt.adam_m.items():
        if nome not in ckpt.tensores or m.shape != ckpt.tensores[nome].shape:
            raise CorruptCheckpointError(f"Momento do Adam sem parâmetro correspondente: '{nome}'", 0)
    return ckpt


def load_checkpoint(caminho: Path) -> Checkpoint:
    dados = Path(caminho).read_bytes()
    ckpt = desserializar(dados)
    logger.debug(f"[checkpoint] {len(ckpt.tensores)} tensores lidos de {caminho}")
    return ckpt
