import numpy as np
import pytest

from beta_survival.data import DataError, Observation, SurvivalData, label_at_horizon


def test_observation_validation():
    with pytest.raises(DataError, match="shift them by one"):
        Observation(0, False)
    with pytest.raises(DataError):
        Observation(2.5, False)
    with pytest.raises(DataError):
        Observation(1, False, weight=0.0)
    obs = Observation(3, 1, (1, 2))
    assert obs.censored is True and obs.features == (1.0, 2.0)


def test_survival_data_validation():
    with pytest.raises(DataError):
        SurvivalData([1, 0], [False, False], np.zeros((2, 0)))
    with pytest.raises(DataError):
        SurvivalData([1, 2], [False], np.zeros((2, 0)))
    with pytest.raises(DataError):
        SurvivalData([1, 2], [False, True], np.zeros((3, 1)))


def test_round_trip_observations():
    obs = [Observation(1, False, (0.5,)), Observation(4, True, (1.5,), 2.0)]
    data = SurvivalData.from_observations(obs, ["x"])
    assert data.observations() == obs
    assert data.subset([1]).observations() == obs[1:]


def test_label_at_horizon():
    data = SurvivalData([1, 2, 3, 4, 5, 2], [False, True, False, True, False, False],
                        np.zeros((6, 0)))
    keep, y = label_at_horizon(data, 3)
    # censored at 2 < 3 is unknown; censored at 4 survived past 3
    assert keep.tolist() == [True, False, True, True, True, True]
    assert y.tolist() == [1, 1, 0, 0, 1]


def test_censored_at_horizon_labels_zero():
    data = SurvivalData([3], [True], np.zeros((1, 0)))
    keep, y = label_at_horizon(data, 3)
    assert keep.tolist() == [True] and y.tolist() == [0]
    with pytest.raises(DataError):
        label_at_horizon(data, 0)


def test_censor_weight_and_admin_censoring():
    data = SurvivalData([1, 5, 2], [False, True, True], np.zeros((3, 0)))
    assert data.with_censor_weight(10.0).weight.tolist() == [1.0, 10.0, 10.0]
    cut = data.censor_at(3)
    assert cut.t.tolist() == [1, 3, 2] and cut.censored.tolist() == [False, True, True]
