"""Interval labeling, confusion counting, and metric arithmetic.

The published-counts block freezes nine rows of (TP, FP, TN, FN) together
with the rates they must reproduce to three decimals; those expectations were
computed by hand from the count definitions before this module existed.
"""

import pytest

from mrtwin.errors import ConfigInvalid
from mrtwin.evaluation import (
    Confusion,
    GroundTruth,
    OverlappingWindowsWarning,
    confusion,
    format_rate,
    label_windows,
    load_counts,
    load_ground_truth,
    metrics,
    summary_row,
    time_to_crash_histogram,
    write_summary_csv,
)

# method, tp, fp, tn, fn, tpr, fpr, f1, precision (None = n.a.)
PUBLISHED_ROWS = [
    ("CAE", 0, 0, 4282, 196, 0.0, 0.0, None, None),
    ("DAE", 21, 55, 4063, 175, 0.107, 0.013, 0.154, 0.276),
    ("SAE", 108, 183, 2665, 88, 0.551, 0.064, 0.444, 0.371),
    ("VAE", 107, 183, 2959, 89, 0.546, 0.058, 0.440, 0.369),
    ("LSTM", 7, 12, 4119, 186, 0.036, 0.003, 0.066, 0.368),
    ("DeepRoad", 44, 250, 3651, 152, 0.225, 0.064, 0.180, 0.150),
    ("MR1", 137, 77, 403, 59, 0.699, 0.160, 0.668, 0.640),
    ("MR2", 141, 72, 408, 55, 0.719, 0.150, 0.689, 0.662),
    ("MR3", 135, 87, 393, 61, 0.689, 0.181, 0.645, 0.608),
]


def truth(crashes, span=(0.0, 60.0)):
    return GroundTruth("seq", span, 10.0, tuple(crashes))


# --- labeling ---

def test_no_crashes_tiles_negatives():
    intervals = label_windows(truth([], span=(0.0, 10.0)), 5.0)
    assert [(i.start, i.end, i.positive) for i in intervals] == [
        (0.0, 5.0, False), (5.0, 10.0, False)]


def test_single_crash_layout():
    intervals = label_windows(truth([20.0], span=(0.0, 20.5)), 5.0)
    positives = [i for i in intervals if i.positive]
    assert [(i.start, i.end) for i in positives] == [(15.0, 20.0)]
    negatives = [(i.start, i.end) for i in intervals if not i.positive]
    assert negatives == [(0.0, 5.0), (5.0, 10.0), (10.0, 15.0), (20.0, 20.5)]


def test_final_partial_negative_kept():
    intervals = label_windows(truth([], span=(0.0, 12.0)), 5.0)
    assert (intervals[-1].start, intervals[-1].end) == (10.0, 12.0)


def test_close_crashes_merge_with_warning():
    with pytest.warns(OverlappingWindowsWarning):
        intervals = label_windows(truth([7.0, 9.0], span=(0.0, 20.0)), 5.0)
    positives = [i for i in intervals if i.positive]
    assert len(positives) == 1
    assert (positives[0].start, positives[0].end) == (2.0, 9.0)
    assert positives[0].merged


def test_window_clipped_at_span_start():
    intervals = label_windows(truth([3.0], span=(0.0, 10.0)), 5.0)
    assert (intervals[0].start, intervals[0].end, intervals[0].positive) == (0.0, 3.0, True)


# --- confusion ---

def test_no_alarms_single_crash():
    intervals = label_windows(truth([15.0], span=(0.0, 20.0)), 5.0)
    assert confusion(intervals, []) == Confusion(0, 0, 3, 1)


def test_alarm_everywhere_hits_everything():
    intervals = label_windows(truth([15.0], span=(0.0, 20.0)), 5.0)
    alarms = [0.1 * k for k in range(200)]
    c = confusion(intervals, alarms)
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 3, 0, 0)


def test_multiple_alarms_in_one_window_count_once():
    intervals = label_windows(truth([15.0], span=(0.0, 20.0)), 5.0)
    assert confusion(intervals, [11.0, 12.0, 13.0]) == Confusion(1, 0, 3, 0)


def test_interval_membership_is_half_open():
    intervals = label_windows(truth([15.0], span=(0.0, 20.0)), 5.0)
    # alarm exactly at the crash instant falls outside [10, 15)
    assert confusion(intervals, [15.0]).fp == 1
    assert confusion(intervals, [15.0]).tp == 0
    assert confusion(intervals, [10.0]).tp == 1


# --- metrics ---

@pytest.mark.parametrize("row", PUBLISHED_ROWS, ids=[r[0] for r in PUBLISHED_ROWS])
def test_published_rates_reproduced(row):
    method, tp, fp, tn, fn, tpr, fpr, f1, precision = row
    got = metrics(method, Confusion(tp, fp, tn, fn))
    for name, want, have in (
        ("tpr", tpr, got.tpr), ("fpr", fpr, got.fpr),
        ("f1", f1, got.f1), ("precision", precision, got.precision),
    ):
        if want is None:
            assert have is None, name
        else:
            assert have == pytest.approx(want, abs=1e-3), name


def test_all_empty_denominators():
    got = metrics("void", Confusion(0, 0, 0, 0))
    assert (got.tpr, got.fpr, got.f1, got.precision) == (None, None, None, None)


def test_f1_none_when_both_rates_zero():
    got = metrics("zero", Confusion(0, 5, 5, 5))
    assert got.precision == 0.0
    assert got.tpr == 0.0
    assert got.f1 is None


def test_format_rate():
    assert format_rate(None) == "n.a."
    assert format_rate(0.71938) == "0.719"


# --- time-to-crash histogram ---

def test_gap_zero_lands_in_first_bin():
    h = time_to_crash_histogram([20.0], truth([20.0]), 5.0, 0.5)
    assert h.counts[0] == 1
    assert h.total == 1


def test_boundary_gap_folds_into_last_bin():
    h = time_to_crash_histogram([15.0], truth([20.0]), 5.0, 0.5)
    assert h.counts[-1] == 1


def test_bin_count_ceiling():
    h = time_to_crash_histogram([], truth([20.0]), 5.0, 0.75)
    assert len(h.counts) == 7  # ceil(5 / 0.75)


def test_earliest_alarm_wins():
    # alarms 2.3 s and 0.4 s before the crash: lead time is 2.3 s
    h = time_to_crash_histogram([17.7, 19.6], truth([20.0]), 5.0, 1.0)
    assert h.counts == (0, 0, 1, 0, 0)


def test_merged_window_counted_once_against_final_crash():
    gt = truth([7.0, 9.0], span=(0.0, 20.0))
    with pytest.warns(OverlappingWindowsWarning):
        h = time_to_crash_histogram([3.0], gt, 5.0, 1.0)
    assert h.total == 1
    assert h.counts[-1] == 1  # gap 6.0 capped into the last bin


def test_alarm_outside_every_window_ignored():
    h = time_to_crash_histogram([1.0], truth([20.0]), 5.0, 0.5)
    assert h.total == 0


# --- files ---

def test_ground_truth_round_trip(tmp_path):
    p = tmp_path / "gt.csv"
    p.write_text("sequence_id,crash_time_s\nseq-1,14.0\nseq-1,30.5\n")
    gt = load_ground_truth(p, (0.0, 60.0), 10.0)
    assert gt.sequence_id == "seq-1"
    assert gt.crash_times == (14.0, 30.5)


def test_ground_truth_header_enforced(tmp_path):
    p = tmp_path / "gt.csv"
    p.write_text("id,time\nseq-1,14.0\n")
    with pytest.raises(ConfigInvalid):
        load_ground_truth(p, (0.0, 60.0), 10.0)


def test_counts_round_trip(tmp_path):
    p = tmp_path / "counts.csv"
    p.write_text("method,tp,fp,tn,fn\nMR2,141,72,408,55\n")
    assert load_counts(p) == [("MR2", Confusion(141, 72, 408, 55))]


def test_summary_csv_uses_na(tmp_path):
    p = tmp_path / "m.csv"
    write_summary_csv(p, [metrics("CAE", Confusion(0, 0, 4282, 196))])
    text = p.read_text()
    assert "n.a." in text
    assert text.splitlines()[0] == "Method,TP,FP,TN,FN,TPR,FPR,F1,Prec."


def test_crash_times_validated():
    with pytest.raises(ValueError):
        GroundTruth("s", (0.0, 10.0), 10.0, (10.0,))  # on the edge, not inside
    with pytest.raises(ValueError):
        GroundTruth("s", (0.0, 10.0), 10.0, (5.0, 5.0))


def test_summary_row_shape():
    row = summary_row(metrics("MR2", Confusion(141, 72, 408, 55)))
    assert row == ["MR2", "141", "72", "408", "55", "0.719", "0.150", "0.689", "0.662"]
