import numpy as np
import pytest

from stormresponse.data import (
    G,
    HindcastSeries,
    PeakExtractionConfig,
    extract_storm_peaks,
    load_hindcast,
    period_from_steepness,
    steepness_from_period,
    write_peaks_csv,
    read_peaks_csv,
)
from stormresponse.errors import DataError


# independently recomputed: 2*pi*10/(9.81*100)
S2_10_10 = 0.06404877988970017


def test_steepness_known_value():
    assert steepness_from_period(10.0, 10.0) == pytest.approx(S2_10_10, rel=1e-12)


def test_steepness_vanishes_with_hs():
    assert steepness_from_period(1e-12, 10.0) == pytest.approx(0.0, abs=1e-12)


def test_period_inverts_steepness_known_value():
    assert period_from_steepness(10.0, S2_10_10) == pytest.approx(10.0, rel=1e-12)


def test_round_trip_identity():
    rng = np.random.default_rng(0)
    hs = rng.uniform(0.5, 15.0, 200)
    t2 = rng.uniform(3.0, 18.0, 200)
    back = period_from_steepness(hs, steepness_from_period(hs, t2))
    assert np.allclose(back, t2, rtol=1e-12)


def test_period_unit_case():
    # hs chosen so 2*pi*hs/g equals s2 exactly -> t2 = 1
    s2 = 0.05
    hs = G * s2 / (2.0 * np.pi)
    assert period_from_steepness(hs, s2) == pytest.approx(1.0, rel=1e-12)


def test_period_power_law():
    t1 = period_from_steepness(5.0, 0.02)
    t2 = period_from_steepness(5.0, 0.04)
    assert t2 == pytest.approx(t1 / np.sqrt(2.0), rel=1e-12)


# ---------------------------------------------------------------------------
# CSV ingestion

def test_load_hindcast_three_rows(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("time,hs,t2\n0,1.0,8.0\n10800,2.0,9.0\n21600,1.5,7.5\n")
    series = load_hindcast(p)
    assert len(series) == 3
    assert series.hs[1] == 2.0


def test_load_hindcast_iso_times(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("time,hs,t2\n2001-01-01T00:00:00Z,1.0,8.0\n2001-01-01T03:00:00Z,2.0,9.0\n")
    series = load_hindcast(p)
    assert series.time[1] - series.time[0] == pytest.approx(10800.0)


def test_load_hindcast_bad_t2_names_row(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("time,hs,t2\n0,1.0,8.0\n10800,2.0,0\n")
    with pytest.raises(DataError, match="row 2"):
        load_hindcast(p)


def test_load_hindcast_empty(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("")
    with pytest.raises(DataError, match="no records"):
        load_hindcast(p)


def test_load_hindcast_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_hindcast(tmp_path / "nope.csv")


def test_load_hindcast_non_monotone(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("time,hs,t2\n10800,1.0,8.0\n0,2.0,9.0\n")
    with pytest.raises(DataError, match="row 2"):
        load_hindcast(p)


# ---------------------------------------------------------------------------
# Storm extraction

def _series(hs, t2=8.0, cadence=10800.0):
    hs = np.asarray(hs, dtype=float)
    return HindcastSeries(time=np.arange(hs.size) * cadence, hs=hs,
                          t2=np.full(hs.size, t2), cadence=cadence)


def test_single_triangular_storm():
    hs = [1, 1, 1, 2, 5, 8, 5, 2, 1, 1, 1, 1]
    sample = extract_storm_peaks(_series(hs), PeakExtractionConfig(threshold=3.0))
    assert len(sample) == 1
    assert sample.hs[0] == 8.0


def test_two_storms_split_by_gap():
    cfg = PeakExtractionConfig(threshold=3.0, min_gap=4)
    hs = [1] * 3 + [8] + [1] * 5 + [7] + [1] * 3  # gap of 5 > min_gap
    sample = extract_storm_peaks(_series(hs), cfg)
    assert len(sample) == 2


def test_close_storms_merge():
    cfg = PeakExtractionConfig(threshold=3.0, min_gap=4)
    hs = [1] * 3 + [8] + [1] * 3 + [7] + [1] * 3  # gap of 3 < min_gap
    sample = extract_storm_peaks(_series(hs), cfg)
    assert len(sample) == 1
    assert sample.hs[0] == 8.0


def test_no_exceedances_error():
    with pytest.raises(DataError, match="no exceedances"):
        extract_storm_peaks(_series([1.0] * 10), PeakExtractionConfig(threshold=5.0))


def test_count_invariant_to_below_threshold_records():
    cfg = PeakExtractionConfig(threshold=3.0, min_gap=4)
    hs = [1] * 4 + [8, 9, 8] + [1] * 6 + [6] + [1] * 4
    base = extract_storm_peaks(_series(hs), cfg)
    padded = [0.5] * 8 + list(hs) + [2.9] * 8
    more = extract_storm_peaks(_series(padded), cfg)
    assert len(more) == len(base)
    assert np.allclose(np.sort(more.hs), np.sort(base.hs))


def test_every_peak_above_threshold():
    rng = np.random.default_rng(7)
    hs = rng.uniform(0.2, 2.0, 500)
    hs[100:105] = [3, 6, 9, 6, 3]
    hs[300:303] = [4, 7, 4]
    cfg = PeakExtractionConfig(threshold_quantile=0.9, min_gap=4)
    sample = extract_storm_peaks(_series(hs), cfg)
    thr = np.quantile(hs, 0.9)
    assert (sample.hs > thr).all()


def test_synthetic_35yr_storm_rate():
    from stormresponse.synth import SynthConfig, generate_hindcast

    series, truth = generate_hindcast(SynthConfig(years=35.0, storms_per_year=73.0, seed=11))
    sample = extract_storm_peaks(series)
    assert len(sample) == truth["n_storms"]
    assert abs(sample.n_an - 73.0) / 73.0 < 0.10


def test_peaks_csv_round_trip(tmp_path):
    sample = extract_storm_peaks(_series([1, 1, 5, 9, 5, 1, 1]),
                                 PeakExtractionConfig(threshold=3.0))
    p = tmp_path / "peaks.csv"
    write_peaks_csv(sample, p)
    back = read_peaks_csv(p, n_an=sample.n_an, years_spanned=sample.years_spanned)
    assert np.allclose(back.hs, sample.hs)
    assert np.allclose(back.s2, sample.s2)
