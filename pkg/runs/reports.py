"""Turning fitted objects into the documents the commands write."""
import pandas as pd
from rest_framework.renderers import JSONRenderer
from rest_framework.utils.encoders import JSONEncoder

from .models import FitReport


def fit_report(panel, design, solution, tune, seed):
    labels = design.column_labels
    metadata = {key: value for key, value in solution.metadata.items() if key != 'estimator'}
    if solution.grid_position is not None:
        metadata['grid_position'] = list(solution.grid_position)
    return FitReport(
        estimator=solution.metadata.get('estimator', 'specs2'),
        target=panel.target_label,
        p=design.p,
        det=str(design.det.kind),
        T_eff=design.T_eff,
        n_parameters=design.n_parameters,
        tune=str(tune),
        coefficients=dict(zip(labels, solution.gamma.tolist())),
        deterministic=dict(zip(design.det.labels(), solution.theta.tolist())),
        active_levels=[labels[i] for i in solution.active_delta],
        active_differences=[labels[design.N + i] for i in solution.active_pi],
        lambda_I=solution.lambda_I,
        lambda_G=solution.lambda_G,
        criterion=solution.criterion,
        kkt_residual=solution.kkt_residual,
        converged=solution.converged,
        iterations=solution.iterations,
        seed=seed,
        metadata=metadata,
    )


def metrics_table(report):
    """Per-estimator summary of a MetricsReport as fixed-width text."""
    frame = pd.DataFrame({
        'RMSNE': report.rmsne,
        'pseudo-power': report.pseudo_power,
        'PCS': report.pcs,
        'PICS': report.pics,
    })
    header = (f'{report.family}  a={report.a:g}  T={report.T}  '
              f'reps={report.n_succeeded}/{report.n_reps}  seed={report.seed}  baseline={report.baseline}')
    return header + '\n' + frame.to_string(float_format='{:.4f}'.format, na_rep='-')


class SortedJSONEncoder(JSONEncoder):
    def __init__(self, *args, **kwargs):
        kwargs['sort_keys'] = True
        super().__init__(*args, **kwargs)


class DocumentRenderer(JSONRenderer):
    """Indented JSON with sorted keys, so equal documents render to equal bytes."""
    encoder_class = SortedJSONEncoder
    strict = False


def dumps(document):
    return DocumentRenderer().render(document, renderer_context={'indent': 2}).decode()
