import os
from pathlib import Path

import pytest

from styletiming.cli import RunConfig, load_study_dir
from styletiming.synth import synth_data


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("synth")
    return synth_data(out, seed=11, n_days=1400)


@pytest.fixture(scope="session")
def study(synth_dir):
    return load_study_dir(synth_dir, RunConfig(synthetic=True))


@pytest.fixture(scope="session")
def real_data_dir():
    path = os.environ.get("STL_DATA_DIR")
    if not path or not Path(path).is_dir():
        pytest.skip("real data not available (set STL_DATA_DIR)")
    return Path(path)
