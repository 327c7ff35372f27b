"""Length curriculum and teacher helping.

Training starts at maximum sequence length 1 and raises the cap by one
every `iterations_per_stage` iterations, up to `max_length`.  Each stage
also decays the teacher-helping ratio: the probability that a training
sample is seeded with a real-sentence prefix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CurriculumSchedule:
    max_length: int = 25
    iterations_per_stage: int = 100
    variable_length: bool = True
    teacher_ratio_start: float = 0.0
    teacher_decay: float = 1.0

    def check(self) -> None:
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")
        if self.iterations_per_stage < 1:
            raise ValueError("iterations_per_stage must be >= 1")
        if not 0.0 <= self.teacher_ratio_start <= 1.0:
            raise ValueError("teacher_ratio_start must lie in [0, 1]")
        if not 0.0 <= self.teacher_decay <= 1.0:
            raise ValueError("teacher_decay must lie in [0, 1]")


@dataclass
class Stage:
    current_max: int
    teacher_ratio: float


def initial_stage(schedule: CurriculumSchedule) -> Stage:
    schedule.check()
    return Stage(current_max=1, teacher_ratio=schedule.teacher_ratio_start)


def advance(stage: Stage, iteration: int, schedule: CurriculumSchedule) -> Stage:
    """Returns the stage after `iteration` completed steps.

    Crossing a multiple of iterations_per_stage bumps the length cap by one
    (up to max_length) and multiplies the teacher ratio by teacher_decay.
    """
    if iteration <= 0 or iteration % schedule.iterations_per_stage != 0:
        return stage
    return Stage(
        current_max=min(stage.current_max + 1, schedule.max_length),
        teacher_ratio=max(stage.teacher_ratio * schedule.teacher_decay, 0.0),
    )


def sample_length(stage: Stage, variable: bool, rng: np.random.Generator) -> int:
    if stage.current_max < 1:
        raise ValueError("current_max must be >= 1")
    if not variable:
        return stage.current_max
    return int(rng.integers(1, stage.current_max + 1))


def teacher_prefix(real_sentence, length: int, stage: Stage,
                   rng: np.random.Generator):
    """With probability teacher_ratio, the first ceil(ratio*length) tokens of
    a real sentence become forced generator inputs; otherwise None."""
    if len(real_sentence) < length:
        raise ValueError("real sentence shorter than requested length")
    ratio = stage.teacher_ratio
    if ratio <= 0.0 or rng.random() >= ratio:
        return None
    k = min(length, math.ceil(ratio * length))
    return tuple(real_sentence[:k])
