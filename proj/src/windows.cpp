#include "cmfda/windows.hpp"

namespace cmfda {

WindowPair window_for_prediction_year(int predict_year, int index) {
    WindowPair w;
    w.index = index;
    w.train = {Date{predict_year - 2, 1}, Date{predict_year - 1, days_in_year(predict_year - 1)}};
    w.predict_year = {Date{predict_year, 1}, Date{predict_year, days_in_year(predict_year)}};
    w.predict = {w.predict_year.first, w.predict_year.last.plus_days(kPredictionExtensionDays)};
    return w;
}

std::vector<WindowPair> make_windows(int first_train_year, int n_windows) {
    if (n_windows < 1) throw Error(ErrorCode::InvalidConfig, "need at least one window");
    std::vector<WindowPair> out;
    out.reserve(static_cast<std::size_t>(n_windows));
    for (int j = 1; j <= n_windows; ++j) out.push_back(window_for_prediction_year(first_train_year + j + 1, j));
    return out;
}

std::vector<Date> clear_dates(const PixelSeries& series, const DateInterval& interval) {
    std::vector<Date> out;
    for (const auto& o : series.observations)
        if (interval.contains(o.nominal) && o.is_clear()) out.push_back(o.nominal);
    return out;
}

std::vector<Date> clear_dates(const PixelSeries& series, const DateInterval& interval, Band band) {
    std::vector<Date> out;
    for (const auto& o : series.observations)
        if (interval.contains(o.nominal) && o.is_clear(band)) out.push_back(o.nominal);
    return out;
}

}  // namespace cmfda
