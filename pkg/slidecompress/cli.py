"""
Command line interface::

    slidecompress gen-data --config run.cfg
    slidecompress pretrain-lm --config run.cfg
    slidecompress train --config run.cfg --baseline prune-k
    slidecompress eval --config run.cfg
    slidecompress bench --config run.cfg --grid 32x32
    slidecompress ablate --config run.cfg --lc 4,16,64
    slidecompress dump-hidden --config run.cfg --output hidden/

Every configuration key can be overridden with ``--<key> VALUE`` after the
subcommand; ``--config`` is read first.

Exit status is 0 on success, 1 on usage errors and 2 on data or
configuration errors.
"""

import argparse
import logging
import os
import sys

from .bench import paired_bench
from .config import RunConfig, get_default_config, load_config
from .dataset import FeatureStore, read_dataset, write_dataset
from .errors import ConfigurationError, SlideCompressError
from .evaluation import evaluate_run, write_transcripts
from .hidden import dump_token_states, token_cluster_stats
from .model import make_encoder
from .report import (
    ablation_segments,
    bench_report_segments,
    eval_report_segments,
    save_report,
    write_report,
)
from .synth import generate_dataset
from .trainer import (
    dataset_vocabulary,
    load_trained,
    load_vocabulary,
    make_samples,
    pretrain,
    run_dir,
    train,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

REPORT_FILE = 'report.tsv'
TRANSCRIPTS_FILE = 'transcripts.tsv'
ABLATION_FILE = 'ablation.tsv'
CLUSTER_FILE = 'clusters.txt'


class ArgumentParser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        # '--template' must not resolve to '--templates'.
        kwargs.setdefault('allow_abbrev', False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '{}: error: {}\n'.format(self.prog, message))


def _config_parser():
    parent = ArgumentParser(add_help=False)
    group = parent.add_argument_group('configuration')
    group.add_argument('--config', metavar='PATH', help='key = value configuration file')
    for key in get_default_config():
        group.add_argument('--' + key, dest='override_' + key, metavar='VALUE')
    group.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    group.add_argument(
        '--color', choices=('auto', 'always', 'never'), default='auto',
        help='color reports written to the terminal',
    )
    return parent


def build_parser():
    parent = _config_parser()
    parser = ArgumentParser(
        prog='slidecompress',
        description='Token-compressed question answering on synthetic slides',
    )
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    commands.add_parser('gen-data', parents=[parent],
                        help='generate slides, questions and features')
    commands.add_parser('pretrain-lm', parents=[parent],
                        help='stage-0 text-only decoder pretraining')
    commands.add_parser('train', parents=[parent],
                        help='stage-1 training of the configured visual path')

    evaluate = commands.add_parser('eval', parents=[parent], help='score a trained run')
    evaluate.add_argument('--split', default='test')
    evaluate.add_argument('--template', help='score one question template only')
    evaluate.add_argument('--output', metavar='DIR',
                          help='report directory (default: <run>/eval)')

    bench = commands.add_parser('bench', parents=[parent],
                                help='throughput and FLOPs of tcp against full-forward')
    bench.add_argument('--phase', choices=('inference', 'train', 'both'), default='both')
    bench.add_argument('--output', metavar='PATH', help='also write the report here')

    ablate = commands.add_parser('ablate', parents=[parent],
                                 help='train and score one run per compression-token count')
    ablate.add_argument('--lc', metavar='LIST', help='comma-separated l_c values')
    ablate.add_argument('--skip-trained', action='store_true',
                        help='reuse runs that already have a final checkpoint')

    dump = commands.add_parser('dump-hidden', parents=[parent],
                               help='export visual, text and compressed token states')
    dump.add_argument('--record', help='record id (default: first test record)')
    dump.add_argument('--split', default='test')
    dump.add_argument('--output', metavar='DIR', default='hidden')
    return parser


def config_from_args(args):
    overrides = {
        key: getattr(args, 'override_' + key)
        for key in get_default_config()
        if getattr(args, 'override_' + key) is not None
    }
    if args.config:
        return load_config(args.config, overrides)
    return RunConfig(**overrides)


def _use_color(args, stream):
    if args.color == 'auto':
        return stream.isatty()
    return args.color == 'always'


def _emit(args, segments):
    write_report(sys.stdout, segments, color=_use_color(args, sys.stdout))


def _write(path, segments):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    save_report(path, list(segments))
    logger.info('wrote %s', path)


def cmd_gen_data(config, args):
    manifest, features, _ = generate_dataset(config, make_encoder(config))
    write_dataset(manifest, config.data_dir, features)
    vocab = dataset_vocabulary(config)
    os.makedirs(os.path.dirname(config.vocab_path) or '.', exist_ok=True)
    vocab.save(config.vocab_path)
    print('{} slides, {} records, {} vocabulary words in {}'.format(
        len(manifest.splits), len(manifest), len(vocab), config.data_dir
    ))


def cmd_pretrain_lm(config, args):
    manifest = read_dataset(config.data_dir, check_features=False)
    result = pretrain(config, manifest, load_vocabulary(config))
    print('stage-0 checkpoint: {}'.format(result.checkpoint))


def cmd_train(config, args):
    manifest = read_dataset(config.data_dir)
    result = train(config, manifest, load_vocabulary(config))
    print('final checkpoint: {}'.format(result.checkpoint))


def _evaluate(config, manifest, vocab, split, template_id, output):
    report, predictions = evaluate_run(config, manifest, vocab, None, split, template_id)
    output = output or os.path.join(run_dir(config), 'eval')
    _write(os.path.join(output, REPORT_FILE), eval_report_segments(report, config.digest()))
    write_transcripts(os.path.join(output, TRANSCRIPTS_FILE), predictions)
    return report


def cmd_eval(config, args):
    manifest = read_dataset(config.data_dir)
    report = _evaluate(config, manifest, load_vocabulary(config), args.split,
                       args.template, args.output)
    _emit(args, eval_report_segments(report, config.digest()))


def cmd_bench(config, args):
    phases = ('inference', 'train') if args.phase == 'both' else (args.phase, )
    report = paired_bench(config, load_vocabulary(config), phases=phases)
    if args.output:
        _write(args.output, bench_report_segments(report))
    _emit(args, bench_report_segments(report))


def cmd_ablate(config, args):
    if args.lc:
        config = config.replace(lc_list=args.lc)
    manifest = read_dataset(config.data_dir)
    vocab = load_vocabulary(config)
    results = []
    for l_c in config.lc_list:
        run = config.replace(l_c=l_c)
        final = os.path.join(run_dir(run), 'final')
        if args.skip_trained and os.path.isdir(final):
            logger.info('reusing %s', final)
        else:
            train(run, manifest, vocab)
        report = _evaluate(run, manifest, vocab, 'test', None, None)
        _emit(args, eval_report_segments(report, run.digest()))
        results.append((l_c, report))
    _write(os.path.join(config.checkpoint_dir, ABLATION_FILE),
           ablation_segments(results, config.digest()))
    _emit(args, ablation_segments(results, config.digest()))


def cmd_dump_hidden(config, args):
    manifest = read_dataset(config.data_dir)
    vocab = load_vocabulary(config)
    samples = make_samples(manifest, FeatureStore(config.data_dir, manifest), vocab, args.split)
    if args.record:
        samples = [s for s in samples if s.record_id == args.record]
        if not samples:
            raise ConfigurationError(
                "record '{}' is not in the {} split".format(args.record, args.split)
            )
    if not samples:
        raise ConfigurationError('split {!r} has no records'.format(args.split))
    bundle = load_trained(config, vocab, 'tcp')
    blocks = dump_token_states(bundle, samples[0], args.output)
    stats = token_cluster_stats(blocks)
    lines = ['record\t{}'.format(samples[0].record_id)]
    lines.extend('spread\t{}\t{:.6f}'.format(k, v) for k, v in stats.spread.items())
    lines.extend(
        'centroid\t{}\t{}\t{:.6f}'.format(a, b, v)
        for (a, b), v in stats.centroid_distance.items()
    )
    with open(os.path.join(args.output, CLUSTER_FILE), 'w', encoding='utf-8') as f:
        f.writelines(line + '\n' for line in lines)
    print('\n'.join(lines))


COMMANDS = {
    'gen-data': cmd_gen_data,
    'pretrain-lm': cmd_pretrain_lm,
    'train': cmd_train,
    'eval': cmd_eval,
    'bench': cmd_bench,
    'ablate': cmd_ablate,
    'dump-hidden': cmd_dump_hidden,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(name)s %(levelname)s %(message)s',
    )
    try:
        config = config_from_args(args)
        COMMANDS[args.command](config, args)
    except (SlideCompressError, OSError) as exc:
        logger.debug('%s failed', args.command, exc_info=True)
        print('slidecompress {}: {}'.format(args.command, exc), file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK
