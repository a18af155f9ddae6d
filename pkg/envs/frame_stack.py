"""
envs/frame_stack.py
Empilha as últimas f observações ao longo do eixo de planos.

Com f=4 reproduz a entrada de "4 quadros consecutivos". No reset, o primeiro
quadro é repetido f vezes. O ambiente empilhado não é enumerável.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from erros import UsageError
from .base import EnvBase, StepResult


class FrameStack:

    enumeravel = False

    def __init__(self, env: EnvBase, frames: int):
        self.env = env
        self.frames = frames
        self._quadros: deque[np.ndarray] = deque(maxlen=frames)
        forma = env.observation_shape
        self.observation_shape = (forma[0] * frames, *forma[1:])
        self.env_id = env.env_id
        self.n_actions = env.n_actions

    def _empilhar(self) -> np.ndarray:
        return np.concatenate(list(self._quadros), axis=0)

    def reset(self, seed: int | None = None) -> np.ndarray:
        obs = self.env.reset(seed)
        self._quadros.clear()
        for _ in range(self.frames):
            self._quadros.append(obs)
        return self._empilhar()

    def step(self, action: int) -> StepResult:
        r = self.env.step(action)
        self._quadros.append(r.observation)
        return StepResult(self._empilhar(), r.reward, r.terminal)

    def exportar_estado(self) -> dict:
        return self.env.exportar_estado()

    def importar_estado(self, salvo: dict, obs: np.ndarray | None = None) -> None:
        """Os quadros saem da própria observação empilhada."""
        if obs is None:
            raise UsageError("FrameStack precisa da observação empilhada para retomar")
        self.env.importar_estado(salvo)
        self._quadros.clear()
        for quadro in np.split(np.asarray(obs), self.frames, axis=0):
            self._quadros.append(quadro)

    @property
    def passos(self) -> int:
        return self.env.passos

    def __repr__(self) -> str:
        return f"<FrameStack f={self.frames} {self.env!r}>"
