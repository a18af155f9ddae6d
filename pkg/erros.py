"""
erros.py
Taxonomia de erros do motor.

Todas as classes herdam de exceções nativas, então quem chama pode capturar
de forma ampla (ValueError, RuntimeError) ou específica.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Configuração inválida: chave desconhecida, parâmetro fora da faixa, ambiente inexistente."""


class UsageError(RuntimeError):
    """Uso incorreto de uma API (step após terminal, ação fora da faixa, cache ausente)."""


class ShapeError(ValueError):
    """Formato de tensor incompatível. A mensagem sempre traz esperado vs recebido."""

    def __init__(self, onde: str, esperado, recebido):
        self.esperado = tuple(esperado) if esperado is not None else None
        self.recebido = tuple(recebido) if recebido is not None else None
        super().__init__(f"{onde}: formato esperado {self.esperado}, recebido {self.recebido}")


class NonFiniteError(FloatingPointError):
    """NaN ou Inf encontrado em ativação, gradiente ou parâmetro."""


class InsufficientDataError(ValueError):
    """Buffer com menos transições do que o pedido."""


class NonEnumerableEnvError(UsageError):
    """Ambiente sem espaço de estados enumerável (ex: com frame stack)."""


class CorruptCheckpointError(ValueError):
    """Checkpoint ilegível. `offset` indica o byte onde a leitura falhou."""

    def __init__(self, mensagem: str, offset: int = 0):
        self.offset = offset
        super().__init__(f"{mensagem} (offset {offset})")


class UnsupportedVersionError(CorruptCheckpointError):
    def __init__(self, encontrada: int, suportada: int, offset: int = 4):
        self.encontrada = encontrada
        self.suportada = suportada
        super().__init__(
            f"Versão de checkpoint {encontrada} não suportada (esta build lê a versão {suportada})",
            offset,
        )


class EnvMismatchError(ValueError):
    """Ambiente reconstruído não bate com a rede salva no checkpoint."""


class PlotError(ValueError):
    def __init__(self, mensagem: str, line: int | None = None):
        self.line = line
        if line is not None:
            mensagem = f"{mensagem} (linha {line})"
        super().__init__(mensagem)


class TrainingAbort(RuntimeError):
    """Falha de um worker durante o treino; interrompe a execução inteira."""
