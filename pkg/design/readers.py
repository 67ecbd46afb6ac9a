import logging

import numpy as np
import pandas as pd

from core.exceptions import InputError

from .models import TimeSeriesPanel

logger = logging.getLogger(__name__)

DATE_HEADERS = {'date', 'time', 'period', 'month', 'quarter', 'year'}


def _is_date_column(name, column):
    if str(name).strip().lower() in DATE_HEADERS:
        return True
    if pd.to_numeric(column, errors='coerce').notna().all():
        return False
    return pd.to_datetime(column, errors='coerce', format='mixed').notna().all()


def read_panel_csv(path, target=0):
    """Read a levels panel: header row, one column per series, optional leading date column.

    ``target`` is a column name or a position among the series columns.
    Every cell must parse as a real number; the first bad cell is reported by
    file line and column name.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError('Could not read CSV file', path=str(path), reason=str(exc)) from exc
    if frame.shape[1] == 0:
        raise InputError('CSV file has no columns', path=str(path))

    index = None
    if _is_date_column(frame.columns[0], frame.iloc[:, 0]):
        index = frame.iloc[:, 0].tolist()
        frame = frame.iloc[:, 1:]

    values = frame.apply(pd.to_numeric, errors='coerce')
    bad = values.isna().to_numpy() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row, column = np.argwhere(bad)[0]
        raise InputError(
            'Non-numeric value in CSV',
            line=int(row) + 2, column=frame.columns[column], value=frame.iat[row, column],
        )

    labels = [str(column).strip() for column in frame.columns]
    if isinstance(target, str) and not target.lstrip('-').isdigit():
        if target not in labels:
            raise InputError('Unknown target column', target=target, columns=labels)
        target_index = labels.index(target)
    else:
        target_index = int(target)
        if not 0 <= target_index < len(labels):
            raise InputError('Target index out of range', target=target_index, columns=len(labels))

    logger.info('Read panel %s: %d rows, %d series, target %s',
                path, len(frame), len(labels), labels[target_index])
    return TimeSeriesPanel(
        values=values.to_numpy(dtype=float),
        target_index=target_index,
        labels=labels,
        index=index,
    )
