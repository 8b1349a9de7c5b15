#!/usr/bin/env python3
# -*- coding: UTF-8 -*-

"""
Command line interface of advtrain

Train robust classifiers, generate adversarial sets, evaluate accuracy
matrices and robustness curves, dump perturbed images and run the robust
logistic regression demo.

Exit codes are 0 on success, 1 on configuration errors and 2 on runtime
failures.
"""

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path
from sys import stdout
from typing import List, Optional

from .adversary import (AttackFamily, PerturbationSpec,
                        generate_adversarial_set, save_adversarial_set)
from .core_math import NormKind
from .data_io import (FetchConfig, LabeledDataset, default_data_dir,
                      fetch_mnist, load_dataset, load_mnist,
                      synthetic_separable)
from .errors import AdvTrainError, ConfigError
from .harness import (AccuracyMatrix, ExperimentConfig, ExperimentRunner,
                      accuracy, curve_to_csv, dump_examples, parse_eps_grid,
                      robustness_curve)
from .logger import LOG_FORMAT, verbosity_to_level
from .logreg_adv import (GDConfig, binary_samples, dataset_margin, fit,
                         is_bounded)
from .net import load_model, save_model
from .robust_train import RobustTrainer, TrainConfigError
from .version import __version__


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser exiting with the configuration error code"""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, "{}: error: {}\n".format(self.prog, message))


def parser_valid_file(parser: argparse.ArgumentParser, arg: str) -> Path:
    """
    Determine whether file exists.

    :param      parser:                 The parser
    :type       parser:                 parser object
    :param      arg:                    The file to check
    :type       arg:                    str
    :raise      argparse.ArgumentError: Argument is not a file
    :returns:   Input file path, parser error is thrown otherwise.
    :rtype:     Path
    """
    if not Path(arg).exists():
        parser.error("The file {} does not exist!".format(arg))
    else:
        return Path(arg).resolve()


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parse CLI arguments.

    :param      argv:  Arguments, sys.argv if None
    :type       argv:  Optional[List[str]]
    :raise      SystemExit  Invalid arguments
    :return:    argparse object
    """
    parser = ArgumentParser(description="""
    Adversarial perturbations and learning with a strong adversary
    """, formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    # default arguments
    parser.add_argument('-d', '--debug',
                        action='store_true',
                        help='Output logger messages to stdout')
    parser.add_argument('-v',
                        default=0,
                        action='count',
                        dest='verbosity',
                        help='Set level of verbosity, default is CRITICAL')
    parser.add_argument('--version',
                        action='version',
                        version='%(prog)s {version}'.
                                format(version=__version__),
                        help='Print version of package and exit')
    parser.add_argument('--progress',
                        action='store_true',
                        help='Show progress bars')

    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    def existing(value: str) -> Path:
        return parser_valid_file(parser, value)

    families = [f.value for f in AttackFamily]
    norms = [n.value for n in NormKind]

    cmd = sub.add_parser('train', help='Train one method of a config file')
    cmd.add_argument('--config', required=True, type=existing)
    cmd.add_argument('--method', required=True,
                     help='Method name or row name in the config')
    cmd.add_argument('--out', required=True, type=Path,
                     help='Model file, the report goes next to it')
    cmd.add_argument('--seed', type=int, default=None)

    cmd = sub.add_parser('attack', help='Generate an adversarial set')
    cmd.add_argument('--model', required=True, type=existing)
    cmd.add_argument('--data', required=True, type=existing,
                     help='Dataset file or MNIST directory')
    cmd.add_argument('--family', required=True, choices=families)
    cmd.add_argument('--norm', default='l2', choices=norms)
    cmd.add_argument('--eps', required=True, type=float)
    cmd.add_argument('--clip', nargs=2, type=float, default=None,
                     metavar=('LO', 'HI'))
    cmd.add_argument('--out', required=True, type=Path)

    cmd = sub.add_parser('eval', help='Accuracy of a model on a dataset')
    cmd.add_argument('--model', required=True, type=existing)
    cmd.add_argument('--data', required=True, type=existing)
    cmd.add_argument('--csv', required=True, type=Path)

    cmd = sub.add_parser('curve', help='Accuracy over an epsilon grid')
    cmd.add_argument('--model', required=True, type=existing)
    cmd.add_argument('--data', required=True, type=existing)
    cmd.add_argument('--family', required=True, choices=families)
    cmd.add_argument('--norm', default='l2', choices=norms)
    cmd.add_argument('--eps-grid', required=True, dest='eps_grid',
                     help='Grid as A:B:STEP')
    cmd.add_argument('--csv', required=True, type=Path)

    cmd = sub.add_parser('experiment', help='Run a full experiment')
    cmd.add_argument('--config', required=True, type=existing)
    cmd.add_argument('--out-dir', required=True, dest='out_dir', type=Path)
    cmd.add_argument('--reference', type=existing, default=None,
                     help='Matrix CSV the result must reproduce')

    cmd = sub.add_parser('dump', help='Write perturbed example images')
    cmd.add_argument('--model', required=True, type=existing)
    cmd.add_argument('--data', required=True, type=existing)
    cmd.add_argument('--family', required=True, choices=families)
    cmd.add_argument('--norm', default='l2', choices=norms)
    cmd.add_argument('--eps', required=True, type=float)
    cmd.add_argument('--count', required=True, type=int)
    cmd.add_argument('--out-dir', required=True, dest='out_dir', type=Path)

    cmd = sub.add_parser('logreg-demo',
                         help='Robust logistic regression on separable data')
    cmd.add_argument('--c', required=True, type=float)
    cmd.add_argument('--norm', default='l2', choices=norms)
    cmd.add_argument('--margin', required=True, type=float)
    cmd.add_argument('--steps', type=int, default=20000)
    cmd.add_argument('--learning-rate', dest='learning_rate', type=float,
                     default=0.5)
    cmd.add_argument('--n', type=int, default=200)
    cmd.add_argument('--dim', type=int, default=2)
    cmd.add_argument('--seed', type=int, default=0)
    cmd.add_argument('--csv', required=True, type=Path)

    cmd = sub.add_parser('fetch-data', help='Download the MNIST files')
    cmd.add_argument('--url', required=True, help='Mirror base URL')
    cmd.add_argument('--dir', type=Path, default=None,
                     help='Target directory, ADVTRAIN_DATA_DIR by default')
    cmd.add_argument('--timeout', type=float, default=30.0)

    return parser.parse_args(argv)


def _load_data(path: Path) -> LabeledDataset:
    if path.is_dir():
        return load_mnist(path)[1]
    return load_dataset(path)


def _spec(args: argparse.Namespace) -> PerturbationSpec:
    clip = getattr(args, 'clip', None)
    return PerturbationSpec(family=args.family,
                            norm=args.norm,
                            budget=args.eps,
                            clip=tuple(clip) if clip else None)


def cmd_train(args: argparse.Namespace, logger: logging.Logger) -> int:
    config = ExperimentConfig.from_file(args.config)
    matches = [m for m in config.methods
               if args.method in (m.name, m.method.value)]
    if not matches:
        raise TrainConfigError("no method '{}' in {}".format(args.method,
                                                             args.config))
    train_config = matches[0]
    if args.seed is not None:
        train_config = dataclasses.replace(train_config, seed=args.seed)

    train_set, validation = config.dataset.load()
    trainer = RobustTrainer(config=train_config,
                            logger=logger,
                            show_progress=args.progress)
    net, report = trainer.fit(train_set)
    save_model(net, args.out)
    report.to_csv(args.out.with_name(args.out.name + '.csv'))
    stdout.write("{} {} validation accuracy {:.6f}\n".format(
        report.model_id, train_config.name, accuracy(net, validation)))
    return 0


def cmd_attack(args: argparse.Namespace, logger: logging.Logger) -> int:
    net = load_model(args.model)
    adversarial = generate_adversarial_set(net, _load_data(args.data),
                                           _spec(args), args.progress)
    save_adversarial_set(adversarial, args.out)
    logger.info("Adversarial set written to {}".format(args.out))
    return 0


def cmd_eval(args: argparse.Namespace, logger: logging.Logger) -> int:
    net = load_model(args.model)
    matrix = AccuracyMatrix()
    matrix.set(args.model.stem, args.data.stem,
               accuracy(net, _load_data(args.data)))
    stdout.write(matrix.to_csv(args.csv))
    return 0


def cmd_curve(args: argparse.Namespace, logger: logging.Logger) -> int:
    net = load_model(args.model)
    rows = robustness_curve(net,
                            AttackFamily.from_name(args.family),
                            NormKind.from_name(args.norm),
                            parse_eps_grid(args.eps_grid),
                            _load_data(args.data))
    stdout.write(curve_to_csv(rows, args.csv))
    return 0


def cmd_experiment(args: argparse.Namespace, logger: logging.Logger) -> int:
    config = ExperimentConfig.from_file(args.config)
    config = dataclasses.replace(config, output_dir=str(args.out_dir))
    matrix = ExperimentRunner(config, logger, args.progress).run()
    stdout.write(matrix.to_csv())
    if args.reference is not None:
        diff = matrix.diff(AccuracyMatrix.from_csv(args.reference))
        if diff:
            stdout.write(diff.to_json(indent=4) + "\n")
            logger.error("Matrix differs from {}".format(args.reference))
            return 2
    return 0


def cmd_dump(args: argparse.Namespace, logger: logging.Logger) -> int:
    net = load_model(args.model)
    paths = dump_examples(net, _load_data(args.data), _spec(args),
                          args.count, args.out_dir)
    logger.info("Wrote {} images to {}".format(len(paths), args.out_dir))
    return 0


def cmd_logreg_demo(args: argparse.Namespace,
                    logger: logging.Logger) -> int:
    norm = NormKind.from_name(args.norm)
    data = binary_samples(synthetic_separable(args.n, args.dim,
                                              args.margin, args.seed))
    model, trace = fit(data, args.c, norm,
                       GDConfig(steps=args.steps,
                                learning_rate=args.learning_rate))
    with open(args.csv, 'w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['step', 'objective', 'w_norm'])
        for step, objective, w_norm in trace:
            writer.writerow([step, "{:.6f}".format(objective),
                             "{:.6f}".format(w_norm)])
    stdout.write("c={:.6f} norm={} margin={:.6f} final_w_norm={:.6f} "
                 "bounded={}\n".format(args.c, norm.value,
                                       dataset_margin(data), trace[-1][2],
                                       "yes" if is_bounded(trace) else "no"))
    return 0


def cmd_fetch_data(args: argparse.Namespace, logger: logging.Logger) -> int:
    config = FetchConfig(base_url=args.url,
                         target_dir=args.dir or default_data_dir(),
                         timeout=args.timeout)
    for name, path in fetch_mnist(config, logger).items():
        stdout.write("{} {}\n".format(name, path))
    return 0


COMMANDS = {
    'train': cmd_train,
    'attack': cmd_attack,
    'eval': cmd_eval,
    'curve': cmd_curve,
    'experiment': cmd_experiment,
    'dump': cmd_dump,
    'logreg-demo': cmd_logreg_demo,
    'fetch-data': cmd_fetch_data,
}


def main(argv: Optional[List[str]] = None) -> int:
    # parse CLI arguments
    args = parse_arguments(argv)

    logging.basicConfig(level=logging.INFO,
                        format=LOG_FORMAT,
                        stream=stdout)
    logger = logging.getLogger(__name__)
    logger.setLevel(level=verbosity_to_level(args.verbosity))
    logger.disabled = not args.debug

    # module loggers of the package follow the same switch
    package_logger = logging.getLogger(__package__)
    if args.debug:
        package_logger.setLevel(level=verbosity_to_level(args.verbosity))
    else:
        package_logger.setLevel(level=logging.CRITICAL + 1)

    try:
        return COMMANDS[args.command](args, logger)
    except ConfigError as e:
        sys.stderr.write("Configuration error: {}\n".format(e))
        return 1
    except (AdvTrainError, OSError, ValueError, ArithmeticError) as e:
        sys.stderr.write("Failed: {}\n".format(e))
        return 2


if __name__ == '__main__':
    sys.exit(main())
