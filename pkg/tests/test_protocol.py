import math

from dfagnn.analysis.diagnostics import AngleReading, EpochRecord, LayerCriteria
from dfagnn.api.protocol import (
    SummaryRow, aggregate_row, epoch_row, epochs_frame, read_csv, read_provenance, summary_frame, write_csv,
)


def _row(seed, test_acc):
    return SummaryRow(command="train", algorithm="dfa", dataset="cora", seed=seed, num_layers=3,
                      best_epoch=10 + seed, val_acc=0.5, test_acc=test_acc)


def test_epoch_row_flattens_per_layer_readings():
    record = EpochRecord(epoch=4, loss=0.3, train_acc=1.0, val_acc=0.5, test_acc=0.25, stage=2,
                         weight_angles=[AngleReading(1, 80.0), AngleReading(2, 70.0)],
                         grad_angles=[AngleReading(0, 60.0, True)],
                         criteria=[LayerCriteria(1, 0.1, -0.2)])
    row = epoch_row(record)
    assert row["stage"] == 2
    assert row["weight_angle_l2"] == 70.0
    assert row["grad_angle_l0"] == 60.0
    assert row["p_l1"] == 0.1 and row["q_l1"] == -0.2
    assert row["degenerate_layers"] == "0"
    assert "degenerate_layers" not in epoch_row(EpochRecord(0, 0.0, 0.0, 0.0, 0.0))


def test_csv_carries_provenance_and_reads_back(tmp_path):
    frame = epochs_frame([EpochRecord(e, 1.0 / (e + 1), 0.5, 0.5, 0.5) for e in range(3)])
    path = write_csv(tmp_path / "out" / "epochs_seed0.csv", frame, '{"alpha": 0.1}')
    assert path.read_text().splitlines()[0] == '# config: {"alpha": 0.1}'
    assert read_provenance(path) == {"alpha": 0.1}
    back = read_csv(path)
    assert list(back["epoch"]) == [0, 1, 2]
    assert back["loss"].iloc[2] == float("%.10g" % (1.0 / 3))


def test_write_csv_is_byte_stable(tmp_path):
    frame = summary_frame([_row(0, 0.8), _row(1, 0.9)])
    a = write_csv(tmp_path / "a.csv", frame, "{}").read_bytes()
    b = write_csv(tmp_path / "b.csv", frame, "{}").read_bytes()
    assert a == b


def test_read_provenance_without_preamble(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("a,b\n1,2\n")
    assert read_provenance(path) is None


def test_aggregate_row():
    rows = [_row(0, 0.8), _row(1, 0.9)]
    agg = aggregate_row(rows, 0.85, 0.6)
    assert agg.seed == "all" and agg.runs == 2 and agg.best_epoch is None
    assert agg.test_acc == 0.85 and agg.test_ci95 == 0.6
    assert math.isnan(rows[0].test_ci95)
