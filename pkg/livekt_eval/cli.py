# livekt_eval/cli.py
#

'''
Command line entry point: livekt {ingest,eval,pretrain,explain,bench}

Exit codes: 0 on success, 1 on runtime failures, 2 on usage, config,
parse or file format errors.
'''

# Import packages
import argparse
import contextlib
import logging
import os
import sys

from livekt_data.container import ContainerFormatError, load_dataset, \
    save_dataset
from livekt_data.data_model import InteractionParseError, dataset_stats, \
    load_interactions_csv, split_students
from livekt_data.encoding import build_tables
from livekt_eval.bench import DEFAULT_SIZES, run_bench, write_bench_csv
from livekt_eval.config import ConfigError, load_config
from livekt_eval.live_eval import LiveSchedule, run_live_eval
from livekt_eval.report import emit_results, format_table, speedup_lines
from livekt_models.minipfn import MiniPFNConfig, MiniPFNPredictor, \
    explain, forward
from livekt_models.pretrain import TrainParams, pretrain, save_weights, \
    write_loss_curve_csv
from livekt_models.priors import PriorConfig
from livekt_models.registry import UnknownModelError, build_predictor

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
LOG_FORMAT = '%(asctime)s %(name)s %(levelname)s: %(message)s'
USAGE_ERRORS = (ConfigError, InteractionParseError, ContainerFormatError,
                UnknownModelError)


def configure_logging(verbose=False):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format=LOG_FORMAT)


@contextlib.contextmanager
def flag_errors(what):
    '''
    Re-raise a ValueError from validating command line values as a
    ConfigError naming what was being validated
    '''
    try:
        yield
    except ValueError as exc:
        raise ConfigError('{0}: {1}'.format(what, exc))


def load_any_dataset(path, strict=True):
    '''
    Function to read a dataset from an LKTD container or an interaction
    CSV, chosen by extension
    '''
    if not os.path.exists(path):
        raise ConfigError('dataset not found: {0}'.format(path))
    if path.endswith('.lktd'):
        return load_dataset(path)
    return load_interactions_csv(path, strict=strict)


def _dataset_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def cmd_ingest(args):
    '''
    Parse, remap and store an interaction CSV as an LKTD container
    '''
    if not args.data or not args.out:
        raise ConfigError('ingest needs --data <csv> and --out <file>')
    dataset = load_interactions_csv(args.data, strict=not args.lenient)
    save_dataset(dataset, args.out)
    print(dataset_stats(dataset))
    logger.info('Wrote %s', args.out)
    return EXIT_OK


def cmd_eval(args):
    '''
    Run the live protocol for every selected model and emit the results
    '''
    overrides = {'data': args.data, 'models': args.models, 'T': args.T,
                 'split_ratio': args.split_ratio,
                 'split_seed': args.split_seed, 'seed': args.seed,
                 'out': args.out, 'weights': args.weights,
                 'emit': args.emit, 'upload': args.upload,
                 'creds': args.creds}
    config = load_config(args.config, overrides).validate()

    dataset = load_any_dataset(config.data)
    split = split_students(dataset, config.split_ratio, config.split_seed)
    name = _dataset_name(config.data)
    logger.info('%s: %s; %d train / %d test students', name,
                dataset_stats(dataset), len(split.train_students),
                len(split.test_students))

    report = None
    for model in config.models:
        with flag_errors('model ' + model):
            predictor = build_predictor(
                model, seed=config.seed, weights_path=config.weights,
                **config.model_overrides.get(model, {}))
        model_report, _ = run_live_eval(predictor, dataset, split,
                                        config.schedule, config.seed, name)
        if report is None:
            report = model_report
        else:
            report.extend(model_report)

    print(format_table(report))
    for line in speedup_lines(report):
        print(line)
    paths = emit_results(report, config.out, config.emit)

    if config.upload:
        from livekt_aws.aws_utils import publish_results
        publish_results(config.upload, paths, config.creds)
    return EXIT_OK


def cmd_pretrain(args):
    '''
    Pretrain MiniPFN and write the weights plus the loss curve
    '''
    if not args.out:
        raise ConfigError('pretrain needs --out <weights file>')
    with flag_errors('training options'):
        train_params = TrainParams(n_episodes=args.episodes,
                                   batch_episodes=args.batch, lr=args.lr,
                                   seed=args.seed,
                                   checkpoint_every=args.checkpoint_every)
    with flag_errors('network options'):
        config = MiniPFNConfig(d_model=args.d_model, n_heads=args.n_heads,
                               n_blocks=args.n_blocks, d_ff=args.d_ff)
    checkpoint = args.checkpoint or args.out + '.ckpt'
    if args.resume and not os.path.exists(args.resume):
        raise ConfigError('checkpoint not found: {0}'.format(args.resume))

    try:
        result = pretrain(PriorConfig(kind=args.prior), train_params, config,
                          checkpoint_path=checkpoint,
                          resume_path=args.resume,
                          progress=not args.no_progress)
    except KeyboardInterrupt:
        print('Interrupted; resume with --resume {0}'.format(checkpoint))
        return EXIT_FAILURE

    save_weights(result.weights, args.out)
    loss_csv = args.loss_csv or os.path.splitext(args.out)[0] + '.loss.csv'
    write_loss_curve_csv(result.loss_curve, loss_csv)
    print('Pretrained {0} episodes; weights: {1}; loss curve: {2}'.format(
        result.episodes_done, args.out, loss_csv))
    return EXIT_OK


def cmd_explain(args):
    '''
    Print the train students MiniPFN attends to most for one test student
    '''
    if not args.data or args.student is None:
        raise ConfigError('explain needs --data and --student')
    if args.k < 1:
        raise ConfigError('--k must be at least 1')
    if not 0.0 < args.split_ratio < 1.0:
        raise ConfigError('--split-ratio must lie in (0, 1)')
    with flag_errors('--T'):
        horizon = LiveSchedule.parse(args.T).horizons
    if len(horizon) != 1:
        raise ConfigError('explain takes a single --T value')
    T = horizon[0]

    dataset = load_any_dataset(args.data)
    if args.student not in dataset.student_vocab:
        raise ConfigError('unknown student id {0!r}'.format(args.student))
    student_idx = dataset.student_vocab.encode(args.student)
    split = split_students(dataset, args.split_ratio, args.split_seed)
    if student_idx not in split.test_students:
        raise ConfigError('student {0!r} is on the train side of split '
                          'seed {1}'.format(args.student, args.split_seed))

    train_table, test_table = build_tables(dataset, split, T, T, T - 1)
    positions = [pos for pos, idx in enumerate(test_table.student_idx)
                 if idx == student_idx]
    if not positions:
        raise ConfigError('student {0!r} has fewer than 2 interactions at '
                          'T={1}'.format(args.student, T))

    predictor = MiniPFNPredictor(weights_path=args.weights, seed=args.seed)
    result = forward(predictor.weights, train_table,
                     test_table.without_labels())
    logger.info('p(correct) for %s at T=%d: %.3f', args.student, T,
                result.probs[positions[0]])
    for rank, (train_idx, weight) in enumerate(
            explain(result.attention, positions[0], args.k), start=1):
        print('{0},{1},{2:.3f}'.format(
            rank, dataset.student_vocab.decode(train_idx), weight))
    return EXIT_OK


def cmd_bench(args):
    '''
    Time in-context prediction against N and T and report log-log slopes
    '''
    try:
        sizes = [int(tok) for tok in args.sizes.split(',') if tok.strip()]
    except ValueError:
        raise ConfigError('--sizes must be a comma separated list of '
                          'integers')
    if not sizes or min(sizes) < 2:
        raise ConfigError('--sizes needs values >= 2')
    with flag_errors('--T'):
        horizons = LiveSchedule.parse(args.T).horizons
    predictor = MiniPFNPredictor(weights_path=args.weights, seed=args.seed)
    result = run_bench(predictor.weights, sizes=sizes, T=args.fixed_T,
                       horizons=horizons, n_fixed=args.n_fixed,
                       repeats=args.repeats, seed=args.seed)
    for line in result.summary_lines():
        print(line)
    if args.out:
        path = os.path.join(args.out, 'bench.csv')
        write_bench_csv(result, path)
        logger.info('Wrote %s', path)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=0,
                        help='random seed (default: 0)')
    common.add_argument('--verbose', action='store_true',
                        help='log debug messages')

    parser = argparse.ArgumentParser(
        prog='livekt', description='Live knowledge tracing benchmark')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    ingest = subparsers.add_parser('ingest', parents=[common],
                                   help='convert an interaction CSV')
    ingest.add_argument('--data', help='interaction CSV')
    ingest.add_argument('--out', help='output dataset file (.lktd)')
    ingest.add_argument('--lenient', action='store_true',
                        help='drop malformed rows instead of failing')
    ingest.set_defaults(func=cmd_ingest)

    evaluate = subparsers.add_parser('eval', parents=[common],
                                     help='run the live protocol')
    evaluate.add_argument('--config', help='INI experiment manifest')
    evaluate.add_argument('--data', help='dataset (.lktd or .csv)')
    evaluate.add_argument('--models', help='comma separated model names')
    evaluate.add_argument('--T', help='comma separated horizons')
    evaluate.add_argument('--split-ratio', dest='split_ratio', type=float)
    evaluate.add_argument('--split-seed', dest='split_seed', type=int)
    evaluate.add_argument('--weights', help='MiniPFN weights file')
    evaluate.add_argument('--out', help='output directory')
    evaluate.add_argument('--emit', help='any of json,csv,svg')
    evaluate.add_argument('--upload', help='s3://bucket/prefix for results')
    evaluate.add_argument('--creds', help='AWS credentials csv')
    evaluate.set_defaults(func=cmd_eval)

    train = subparsers.add_parser('pretrain', parents=[common],
                                  help='pretrain MiniPFN on a prior')
    train.add_argument('--out', help='output weights file (.lktw)')
    train.add_argument('--episodes', type=int, default=10000)
    train.add_argument('--batch', type=int, default=8)
    train.add_argument('--lr', type=float, default=1e-3)
    train.add_argument('--prior', choices=('kt', 'scm', 'mix'),
                       default='kt')
    train.add_argument('--d-model', dest='d_model', type=int, default=64)
    train.add_argument('--n-heads', dest='n_heads', type=int, default=4)
    train.add_argument('--n-blocks', dest='n_blocks', type=int, default=3)
    train.add_argument('--d-ff', dest='d_ff', type=int, default=128)
    train.add_argument('--checkpoint', help='checkpoint file')
    train.add_argument('--checkpoint-every', dest='checkpoint_every',
                       type=int, default=1000)
    train.add_argument('--resume', help='checkpoint to continue from')
    train.add_argument('--loss-csv', dest='loss_csv')
    train.add_argument('--no-progress', dest='no_progress',
                       action='store_true')
    train.set_defaults(func=cmd_pretrain)

    expl = subparsers.add_parser('explain', parents=[common],
                                 help='rank influential train students')
    expl.add_argument('--weights', help='MiniPFN weights file')
    expl.add_argument('--data', help='dataset (.lktd or .csv)')
    expl.add_argument('--student', help='external id of a test student')
    expl.add_argument('--T', default='10')
    expl.add_argument('--k', type=int, default=5)
    expl.add_argument('--split-ratio', dest='split_ratio', type=float,
                      default=0.8)
    expl.add_argument('--split-seed', dest='split_seed', type=int,
                      default=0)
    expl.set_defaults(func=cmd_explain)

    bench = subparsers.add_parser('bench', parents=[common],
                                  help='time in-context prediction')
    bench.add_argument('--weights', help='MiniPFN weights file')
    bench.add_argument('--sizes',
                       default=','.join(str(n) for n in DEFAULT_SIZES))
    bench.add_argument('--T', default='5,10,15,20',
                       help='horizons of the T axis')
    bench.add_argument('--fixed-T', dest='fixed_T', type=int, default=10)
    bench.add_argument('--n-fixed', dest='n_fixed', type=int, default=256)
    bench.add_argument('--repeats', type=int, default=5)
    bench.add_argument('--out', help='output directory for bench.csv')
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    '''
    Parse arguments, run the subcommand and return its exit code
    '''
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    configure_logging(args.verbose)

    try:
        return args.func(args)
    except USAGE_ERRORS as exc:
        print('livekt {0}: error: {1}'.format(args.command, exc),
              file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        logger.debug('Unhandled failure', exc_info=True)
        print('livekt {0}: failed: {1}'.format(args.command, exc),
              file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
