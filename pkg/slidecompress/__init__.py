# -*- coding: utf-8 -*-

"""Token-compressed visual question answering on synthetic whole-slide
images."""

__version__ = '0.1.0'

from .bench import bench_throughput, paired_bench
from .compression import CompressionBank, CompressionStack, compress
from .config import (
    RunConfig,
    get_default_config,
    load_config,
    parse_config,
    reference_config,
)
from .decoder import DecoderLM, GenerationSettings, generate, pretrain_lm_step
from .errors import SlideCompressError
from .evaluation import EvalReport, accuracy, parse_choice, run_baseline
from .flops import count_flops
from .hidden import dump_token_states, token_cluster_stats
from .model import ModelBundle, register_visual_path
from .optim import Schedule, adamw_step, lr_at
from .synth import SlideSpec, generate_dataset, generate_qa, generate_slide
from .tensor import Tensor, backward, no_grad


__all__ = [
    'RunConfig',
    'get_default_config',
    'load_config',
    'parse_config',
    'reference_config',
    'SlideCompressError',
    'Tensor',
    'backward',
    'no_grad',
    'SlideSpec',
    'generate_slide',
    'generate_qa',
    'generate_dataset',
    'CompressionBank',
    'CompressionStack',
    'compress',
    'DecoderLM',
    'GenerationSettings',
    'generate',
    'pretrain_lm_step',
    'Schedule',
    'lr_at',
    'adamw_step',
    'ModelBundle',
    'register_visual_path',
    'EvalReport',
    'accuracy',
    'parse_choice',
    'run_baseline',
    'count_flops',
    'bench_throughput',
    'paired_bench',
    'dump_token_states',
    'token_cluster_stats',
]
