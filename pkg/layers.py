"""
layers.py
Camadas com forward/backward escritos à mão sobre numpy.

Tipos de camada: conv2d, maxpool2d, fully_connected, relu, softmax.

Convenções:
  - Tensores de imagem são (planos, altura, largura), sem dimensão de lote
  - Convolução e pooling usam janelas válidas, sem padding; linhas/colunas
    finais que o passo não cobre são descartadas
  - fully_connected achata a entrada (qualquer formato) e devolve vetor
  - softmax opera sobre o vetor achatado, com subtração do máximo
  - Toda saída é checada: NaN/Inf vira NonFiniteError

O cache devolvido pelo forward carrega o tipo da camada e o formato da saída;
o backward recusa cache ausente, de outro tipo ou gradiente de formato errado.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from erros import NonFiniteError, ShapeError, UsageError

LayerKind = Literal["conv2d", "maxpool2d", "fully_connected", "relu", "softmax"]


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    in_channels: int = 0
    out_channels: int = 0
    kernel_h: int = 0
    kernel_w: int = 0
    stride: int = 1
    pool_h: int = 0
    pool_w: int = 0
    in_dim: int = 0
    out_dim: int = 0

    def __post_init__(self):
        if self.kind == "conv2d":
            dims = (self.in_channels, self.out_channels, self.kernel_h, self.kernel_w)
        elif self.kind == "maxpool2d":
            dims = (self.pool_h, self.pool_w)
        elif self.kind == "fully_connected":
            dims = (self.in_dim, self.out_dim)
        elif self.kind in ("relu", "softmax"):
            dims = ()
        else:
            raise UsageError(f"Tipo de camada desconhecido: {self.kind}")
        if any(d <= 0 for d in dims) or self.stride < 1:
            raise UsageError(f"Dimensões inválidas para {self.kind}: {self}")


def conv2d(in_channels: int, out_channels: int, kernel: int | tuple[int, int], stride: int = 1) -> LayerSpec:
    kh, kw = (kernel, kernel) if isinstance(kernel, int) else kernel
    return LayerSpec("conv2d", in_channels=in_channels, out_channels=out_channels,
                     kernel_h=kh, kernel_w=kw, stride=stride)


def maxpool2d(pool_h: int, pool_w: int | None = None) -> LayerSpec:
    return LayerSpec("maxpool2d", pool_h=pool_h, pool_w=pool_w or pool_h)


def fully_connected(in_dim: int, out_dim: int) -> LayerSpec:
    return LayerSpec("fully_connected", in_dim=in_dim, out_dim=out_dim)


RELU = LayerSpec("relu")
SOFTMAX = LayerSpec("softmax")


@dataclass
class LayerCache:
    kind: str
    out_shape: tuple[int, ...]
    dados: dict = field(default_factory=dict)


# ═══════════════════════════════════════════════════════════════
# ARITMÉTICA DE FORMATOS
# ═══════════════════════════════════════════════════════════════

def param_shapes(spec: LayerSpec) -> dict[str, tuple[int, ...]]:
    if spec.kind == "conv2d":
        return {
            "w": (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w),
            "b": (spec.out_channels,),
        }
    if spec.kind == "fully_connected":
        return {"w": (spec.out_dim, spec.in_dim), "b": (spec.out_dim,)}
    return {}


def output_shape(spec: LayerSpec, in_shape: tuple[int, ...]) -> tuple[int, ...]:
    in_shape = tuple(in_shape)
    if spec.kind == "conv2d":
        if len(in_shape) != 3 or in_shape[0] != spec.in_channels:
            raise ShapeError("conv2d", (spec.in_channels, "H", "W"), in_shape)
        _, h, w = in_shape
        if h < spec.kernel_h or w < spec.kernel_w:
            raise ShapeError("conv2d (janela maior que a entrada)",
                             (spec.in_channels, spec.kernel_h, spec.kernel_w), in_shape)
        return (
            spec.out_channels,
            (h - spec.kernel_h) // spec.stride + 1,
            (w - spec.kernel_w) // spec.stride + 1,
        )
    if spec.kind == "maxpool2d":
        if len(in_shape) != 3 or in_shape[1] < spec.pool_h or in_shape[2] < spec.pool_w:
            raise ShapeError("maxpool2d", ("C", f">={spec.pool_h}", f">={spec.pool_w}"), in_shape)
        return (in_shape[0], in_shape[1] // spec.pool_h, in_shape[2] // spec.pool_w)
    if spec.kind == "fully_connected":
        if math.prod(in_shape) != spec.in_dim:
            raise ShapeError("fully_connected", (spec.in_dim,), in_shape)
        return (spec.out_dim,)
    if spec.kind == "softmax":
        return (math.prod(in_shape),)
    return in_shape


def init_params(spec: LayerSpec, rng: np.random.Generator, dtype=np.float32) -> dict[str, np.ndarray]:
    """Uniforme em [-b, b] com b = sqrt(6/(fan_in + fan_out)); vieses zerados."""
    formas = param_shapes(spec)
    if not formas:
        return {}
    if spec.kind == "conv2d":
        area = spec.kernel_h * spec.kernel_w
        fan_in, fan_out = spec.in_channels * area, spec.out_channels * area
    else:
        fan_in, fan_out = spec.in_dim, spec.out_dim
    limite = math.sqrt(6.0 / (fan_in + fan_out))
    return {
        "w": rng.uniform(-limite, limite, size=formas["w"]).astype(dtype),
        "b": np.zeros(formas["b"], dtype=dtype),
    }


def _checar_finito(arr: np.ndarray, onde: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"Valor não finito em {onde}")
    return arr


# ═══════════════════════════════════════════════════════════════
# FORWARD / BACKWARD POR TIPO
# ═══════════════════════════════════════════════════════════════

def _conv_forward(spec, params, x):
    s = spec.stride
    janelas = sliding_window_view(x, (spec.kernel_h, spec.kernel_w), axis=(1, 2))[:, ::s, ::s]
    # janelas: (C, Ho, Wo, kh, kw); w: (O, C, kh, kw)
    saida = np.tensordot(params["w"], janelas, axes=([1, 2, 3], [0, 3, 4]))
    saida = saida + params["b"][:, None, None]
    return saida, {"janelas": janelas, "w": params["w"], "in_shape": x.shape}


def _conv_backward(spec, dados, g):
    janelas, w = dados["janelas"], dados["w"]
    s = spec.stride
    _, ho, wo = g.shape
    dw = np.tensordot(g, janelas, axes=([1, 2], [1, 2]))
    db = g.sum(axis=(1, 2))
    colunas = np.tensordot(w, g, axes=([0], [0]))  # (C, kh, kw, Ho, Wo)
    dx = np.zeros(dados["in_shape"], dtype=g.dtype)
    for p in range(spec.kernel_h):
        for q in range(spec.kernel_w):
            dx[:, p:p + s * ho:s, q:q + s * wo:s] += colunas[:, p, q]
    return dx, {"w": dw, "b": db}


def _pool_forward(spec, params, x):
    c, h, w = x.shape
    ho, wo = h // spec.pool_h, w // spec.pool_w
    blocos = (
        x[:, :ho * spec.pool_h, :wo * spec.pool_w]
        .reshape(c, ho, spec.pool_h, wo, spec.pool_w)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, ho, wo, spec.pool_h * spec.pool_w)
    )
    # argmax desempata pelo primeiro máximo da janela
    indices = blocos.argmax(axis=-1)
    saida = np.take_along_axis(blocos, indices[..., None], axis=-1)[..., 0]
    return saida, {"indices": indices, "in_shape": x.shape}


def _pool_backward(spec, dados, g):
    c, h, w = dados["in_shape"]
    _, ho, wo = g.shape
    blocos = np.zeros((c, ho, wo, spec.pool_h * spec.pool_w), dtype=g.dtype)
    np.put_along_axis(blocos, dados["indices"][..., None], g[..., None], axis=-1)
    recorte = (
        blocos.reshape(c, ho, wo, spec.pool_h, spec.pool_w)
        .transpose(0, 1, 3, 2, 4)
        .reshape(c, ho * spec.pool_h, wo * spec.pool_w)
    )
    dx = np.zeros((c, h, w), dtype=g.dtype)
    dx[:, :ho * spec.pool_h, :wo * spec.pool_w] = recorte
    return dx, {}


def _fc_forward(spec, params, x):
    plano = x.reshape(-1)
    return params["w"] @ plano + params["b"], {"x": plano, "w": params["w"], "in_shape": x.shape}


def _fc_backward(spec, dados, g):
    dw = np.outer(g, dados["x"])
    dx = (dados["w"].T @ g).reshape(dados["in_shape"])
    return dx, {"w": dw, "b": g.copy()}


def _relu_forward(spec, params, x):
    return np.maximum(x, 0), {"mascara": x > 0}


def _relu_backward(spec, dados, g):
    return g * dados["mascara"], {}


def _softmax_forward(spec, params, x):
    z = x.reshape(-1)
    e = np.exp(z - z.max())
    y = e / e.sum()
    return y, {"y": y, "in_shape": x.shape}


def _softmax_backward(spec, dados, g):
    y = dados["y"]
    dx = y * (g - np.dot(g, y))
    return dx.reshape(dados["in_shape"]), {}


_FORWARD: dict[str, Callable] = {
    "conv2d":          _conv_forward,
    "maxpool2d":       _pool_forward,
    "fully_connected": _fc_forward,
    "relu":            _relu_forward,
    "softmax":         _softmax_forward,
}

_BACKWARD: dict[str, Callable] = {
    "conv2d":          _conv_backward,
    "maxpool2d":       _pool_backward,
    "fully_connected": _fc_backward,
    "relu":            _relu_backward,
    "softmax":         _softmax_backward,
}


# ═══════════════════════════════════════════════════════════════
# API PÚBLICA
# ═══════════════════════════════════════════════════════════════

def layer_forward(spec: LayerSpec, params: dict[str, np.ndarray], x: np.ndarray) -> tuple[np.ndarray, LayerCache]:
    esperado = output_shape(spec, x.shape)
    for nome, forma in param_shapes(spec).items():
        if nome not in params:
            raise UsageError(f"{spec.kind}: parâmetro '{nome}' ausente")
        if params[nome].shape != forma:
            raise ShapeError(f"{spec.kind}.{nome}", forma, params[nome].shape)

    saida, dados = _FORWARD[spec.kind](spec, params, x)
    _checar_finito(saida, f"forward {spec.kind}")
    return saida, LayerCache(spec.kind, esperado, dados)


def layer_backward(spec: LayerSpec, cache: LayerCache | None, upstream: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    if cache is None or not cache.dados:
        raise UsageError(f"{spec.kind}: backward sem cache do forward correspondente")
    if cache.kind != spec.kind:
        raise UsageError(f"Cache de '{cache.kind}' usado no backward de '{spec.kind}'")
    if upstream.shape != cache.out_shape:
        raise ShapeError(f"backward {spec.kind}", cache.out_shape, upstream.shape)

    dx, grads = _BACKWARD[spec.kind](spec, cache.dados, upstream)
    _checar_finito(dx, f"backward {spec.kind}")
    for nome, g in grads.items():
        _checar_finito(g, f"gradiente {spec.kind}.{nome}")
    return dx, grads


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits.reshape(-1)
    deslocado = z - z.max()
    return deslocado - np.log(np.exp(deslocado).sum())
