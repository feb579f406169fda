import pytest

from synth import synth_dataset, write_dataset_csvs

ACCEPTANCE_VERDICTS = []


def record_acceptance_verdict(line):
    """Collected by test_acceptance; echoed after the run ends."""
    ACCEPTANCE_VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    """The seed-2024 scenario rendered to CSV files on disk."""
    stations, status, trips, _ = synth_dataset(2024)
    d = tmp_path_factory.mktemp("dataset")
    write_dataset_csvs(d, stations, status, trips)
    return d
