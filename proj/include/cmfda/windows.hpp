#pragma once

#include <vector>

#include "cmfda/core.hpp"

namespace cmfda {

/// Days appended after Dec 31 of each prediction year so that runs of up
/// to six consecutive 16-day violations starting late in the year complete.
inline constexpr int kPredictionExtensionDays = 120;

struct WindowPair {
    int index = 1;               ///< 1-based
    DateInterval train;          ///< two calendar years
    DateInterval predict;        ///< prediction year plus extension
    DateInterval predict_year;   ///< the bare calendar year

    bool operator==(const WindowPair&) const = default;
};

/// Window j (1-based) trains on [first_train_year+j-1, first_train_year+j]
/// and predicts first_train_year+j+1. Throws InvalidConfig if n_windows < 1.
std::vector<WindowPair> make_windows(int first_train_year, int n_windows);

WindowPair window_for_prediction_year(int predict_year, int index = 1);

/// Nominal dates inside `interval` whose observation is clear.
std::vector<Date> clear_dates(const PixelSeries& series, const DateInterval& interval);
/// Same, additionally requiring a non-fill value for `band`.
std::vector<Date> clear_dates(const PixelSeries& series, const DateInterval& interval, Band band);

}  // namespace cmfda
