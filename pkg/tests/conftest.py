import numpy as np
import pytest

from vlmuncert import EmbeddingMatrix, LabeledDataset

_ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE_RESULTS[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        criterion = name.removeprefix("test_").split("_")[0].upper()
        label = " ".join(name.removeprefix("test_").split("_")[1:])
        outcome = "PASS" if _ACCEPTANCE_RESULTS[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{criterion} {label}: {outcome}")


def small_dataset(rows=4, dims=3, labels=(0, 0, 1, 1), normalize=False):
    """A tiny, fully deterministic dataset for format tests."""
    data = np.arange(rows * dims, dtype=np.float64).reshape(rows, dims) + 1.0
    return LabeledDataset(
        embeddings=EmbeddingMatrix(data, normalized=normalize),
        labels=np.array(labels),
        class_names=tuple(f"class_{i}" for i in range(max(labels) + 1)),
        splits={"train": np.arange(rows // 2), "test": np.arange(rows // 2, rows)},
    )
