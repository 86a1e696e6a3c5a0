import datetime

import numpy as np

from fxcast import TimeSeries


def series_of(values, start=datetime.date(2000, 1, 7), name="series"):
    """TimeSeries over the given values with synthetic weekly dates."""
    values = np.asarray(values, dtype=float)
    dates = tuple(start + datetime.timedelta(weeks=i) for i in range(len(values)))
    return TimeSeries(dates=dates, values=values, name=name)
