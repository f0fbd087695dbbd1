# livekt_eval/report.py
#

'''
Emission of evaluation results: JSON, CSV, an SVG chart with AUC and
time against T, and the printed per-model table
'''

# Import packages
import csv
import io
import json
import logging
import os

from livekt_data.container import atomic_write_bytes

logger = logging.getLogger(__name__)

CSV_HEADER = ('dataset', 'model', 'T', 'auc', 'accuracy', 'logloss',
              'n_test_rows', 'fit_seconds', 'predict_seconds', 'epochs')
EMIT_CHOICES = ('json', 'csv', 'svg')


def report_json(report):
    return json.dumps(report.to_dicts(), indent=2, sort_keys=False) + '\n'


def report_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for entry in report.entries:
        writer.writerow([
            entry.dataset, entry.model, entry.T,
            '' if entry.auc is None else repr(float(entry.auc)),
            repr(float(entry.accuracy)), repr(float(entry.logloss)),
            entry.n_test_rows, repr(float(entry.fit_seconds)),
            repr(float(entry.predict_seconds)), entry.epochs])
    return buf.getvalue()


def report_svg(report):
    '''
    Function to draw AUC against T (top) and fit + predict time against
    T (bottom) for every model, returned as SVG text
    '''
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    fig, (ax_auc, ax_time) = plt.subplots(nrows=2, ncols=1, sharex=True,
                                          figsize=(6, 6))
    for model in report.models():
        entries = [e for e in report.entries if e.model == model]
        horizons = [e.T for e in entries]
        aucs = [float('nan') if e.auc is None else e.auc for e in entries]
        ax_auc.plot(horizons, aucs, marker='o', label=model)
        ax_time.plot(horizons, [e.total_seconds for e in entries],
                     marker='o', label=model)
    ax_auc.set_ylabel('AUC')
    ax_auc.legend(loc='best', fontsize='small')
    ax_time.set_ylabel('time (s)')
    ax_time.set_yscale('log')
    ax_time.set_xlabel('T')
    fig.tight_layout()

    buf = io.StringIO()
    fig.savefig(buf, format='svg')
    plt.close(fig)
    return buf.getvalue()


def format_table(report):
    '''
    Function to render one row per model and one column per T with AUCs
    to 3 decimals, plus the median time per T
    '''
    horizons = report.horizons()
    models = report.models()
    width = max([len('model')] + [len(m) for m in models]) + 2
    header = 'model'.ljust(width) + ''.join(
        'T={0}'.format(T).rjust(8) for T in horizons) + 'time (s)'.rjust(12)
    lines = [header]
    for model in models:
        cells = []
        for T in horizons:
            try:
                value = report.entry(model, T).auc
            except KeyError:
                value = None
            cells.append(('n/a' if value is None else
                          '{0:.3f}'.format(value)).rjust(8))
        lines.append(model.ljust(width) + ''.join(cells) +
                     '{0:.4f}'.format(report.median_seconds(model)).rjust(12))
    return '\n'.join(lines)


def time_ratio(report, model_a, model_b):
    '''
    Ratio of median per-T times of two models
    '''
    numer = report.median_seconds(model_a)
    denom = report.median_seconds(model_b)
    if denom == 0.0:
        return float('inf')
    return numer / denom


def speedup_lines(report):
    '''
    One "modelA/modelB time ratio = r" line per pair of models, in
    evaluation order
    '''
    models = report.models()
    lines = []
    for pos, model_a in enumerate(models):
        for model_b in models[pos + 1:]:
            lines.append('{0}/{1} time ratio = {2:.2f}'.format(
                model_a, model_b, time_ratio(report, model_a, model_b)))
    return lines


def emit_results(report, out_dir, emit=('json', 'csv')):
    '''
    Function to write the requested result files atomically

    Parameters
    ----------
    :type report: livekt_eval.live_eval.EvalReport
    :param report: finished evaluation
    :type out_dir: str
    :param out_dir: output directory, created when missing
    :type emit: iterable
    :param emit: (optional), default=('json', 'csv')
        subset of EMIT_CHOICES

    Returns
    -------
    :return: paths : list
        written files in EMIT_CHOICES order
    '''

    unknown = set(emit) - set(EMIT_CHOICES)
    if unknown:
        raise ValueError('unknown emit format(s): {0}'.format(
            ', '.join(sorted(unknown))))
    writers = {'json': report_json, 'csv': report_csv, 'svg': report_svg}
    paths = []
    for fmt in EMIT_CHOICES:
        if fmt not in emit:
            continue
        path = os.path.join(out_dir, 'results.{0}'.format(fmt))
        atomic_write_bytes(path, writers[fmt](report).encode('utf-8'))
        logger.info('Wrote %s', path)
        paths.append(path)
    return paths
