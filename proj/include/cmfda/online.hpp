#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "cmfda/detection.hpp"

namespace cmfda {

/// Refit: every evaluation refits the pixel on the clear observations of the
/// two years before the run it tests. FixedModels: evaluations reuse models
/// fitted once for the monitoring window.
enum class OnlinePolicy { Refit, FixedModels };

std::string_view to_string(OnlinePolicy p) noexcept;
OnlinePolicy parse_online_policy(std::string_view text);

struct OnlineConfig {
    DetectionRule rule = default_multivariate_rule();
    /// Runs must start inside predict_year and end inside predict.
    WindowPair period;
    OnlinePolicy policy = OnlinePolicy::Refit;
    FitOptions fit;
    int threads = 1;
};

/// Training interval used by the Refit policy for a run starting at `start`:
/// the two calendar years ending the day before.
DateInterval refit_interval(Date start);

/// Processes one nominal date at a time over a growing archive. Pixels
/// flagged once leave the monitored set for good.
class OnlineMonitor {
public:
    OnlineMonitor(OnlineConfig cfg, std::vector<PixelSeries> archive);

    /// Only these pixels are monitored; by default every archived pixel is.
    void set_forest_mask(std::set<PixelId> mask);
    /// Models used by the FixedModels policy.
    void set_models(std::map<PixelId, WindowModels> models);
    /// Restores earlier flags, e.g. when resuming from saved state.
    void restore(std::span<const DetectionResult> flagged, std::optional<Date> last_processed);

    /// Appends observations of a new batch. Pixels must already be archived
    /// and each batch must continue the 16-day cadence (InvalidValue).
    void append(std::span<const PixelSeries> batch);

    /// Evaluates every monitored pixel that is clear at nominal date t and
    /// returns the pixels flagged at t, in archive order.
    std::vector<DetectionResult> step(Date t);

    /// Steps through every archived nominal date after the last processed
    /// one that lies in the monitoring window.
    std::vector<DetectionResult> replay();

    const std::map<PixelId, DetectionResult>& flagged() const noexcept { return flagged_; }
    std::optional<Date> last_processed() const noexcept { return last_processed_; }
    /// Models of the most recent refit per pixel (Refit policy).
    const std::map<PixelId, std::vector<HarmonicModel>>& latest_models() const noexcept { return latest_models_; }

private:
    std::optional<DetectionResult> evaluate_pixel(std::size_t index, Date t,
                                                  std::vector<HarmonicModel>& fitted) const;

    OnlineConfig cfg_;
    std::vector<PixelSeries> archive_;
    std::map<PixelId, std::size_t> index_;
    std::optional<std::set<PixelId>> mask_;
    std::map<PixelId, WindowModels> models_;
    std::map<PixelId, DetectionResult> flagged_;
    std::map<PixelId, std::vector<HarmonicModel>> latest_models_;
    std::optional<Date> last_processed_;
};

}  // namespace cmfda
