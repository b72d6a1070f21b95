#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cmfda/detection.hpp"
#include "cmfda/landuse.hpp"
#include "cmfda/standardize.hpp"
#include "cmfda/training.hpp"

namespace cmfda {

/// Every file starts with "# cmfda <kind> v<version>", may carry further
/// "# key: value" lines, then a fixed column line. Reals are written with
/// nine significant digits, except standardizer statistics, which are
/// written in shortest round-trip form.
inline constexpr int kSchemaVersion = 1;

using Metadata = std::map<std::string, std::string>;

/// Shortest text that reads back to the same value at nine significant digits.
std::string format_real(double v);

// Series ---------------------------------------------------------------------

void write_series(std::ostream& out, std::span<const PixelSeries> pixels);
/// Records are grouped by pixel in order of first appearance. Throws
/// ParseError for malformed fields or records breaking the observation and
/// cadence invariants, SchemaVersionMismatch for another version.
std::vector<PixelSeries> read_series(std::istream& in, const std::string& name = "<series>");

void write_series(const std::filesystem::path& path, std::span<const PixelSeries> pixels);
std::vector<PixelSeries> read_series(const std::filesystem::path& path);

// Labels, land use, sites ----------------------------------------------------

void write_labels(std::ostream& out, std::span<const DeforestationLabel> labels);
std::vector<DeforestationLabel> read_labels(std::istream& in, const std::string& name = "<labels>");
void write_labels(const std::filesystem::path& path, std::span<const DeforestationLabel> labels);
std::vector<DeforestationLabel> read_labels(const std::filesystem::path& path);

void write_landuse(std::ostream& out, const LanduseFineGrid& grid);
LanduseFineGrid read_landuse(std::istream& in, const std::string& name = "<landuse>");
void write_landuse(const std::filesystem::path& path, const LanduseFineGrid& grid);
LanduseFineGrid read_landuse(const std::filesystem::path& path);

void write_sites(const std::filesystem::path& path, const std::map<std::string, DefoType>& sites);
std::map<std::string, DefoType> read_sites(const std::filesystem::path& path);

// Models -----------------------------------------------------------------------

struct ModelFile {
    WindowPair window;
    std::vector<HarmonicModel> models;
};

void save_models(std::ostream& out, const ModelFile& file);
ModelFile load_models(std::istream& in, const std::string& name = "<models>");
void save_models(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_models(const std::filesystem::path& path);

/// Regroups per-window model files into the per-pixel layout used by
/// compute_errors: result[pixel][window position].
std::map<PixelId, std::vector<WindowModels>> models_by_pixel(std::span<const ModelFile> files);

// Standardizers ----------------------------------------------------------------

void save_standardizer(std::ostream& out, const StandardizerSet& set);
StandardizerSet load_standardizer(std::istream& in, const std::string& name = "<standardizer>");
void save_standardizer(const std::filesystem::path& path, const StandardizerSet& set);
StandardizerSet load_standardizer(const std::filesystem::path& path);

// Outputs ----------------------------------------------------------------------

void write_detections(std::ostream& out, std::span<const DetectionResult> results, const Metadata& meta = {});
std::vector<DetectionResult> read_detections(std::istream& in, const std::string& name = "<detections>",
                                             Metadata* meta = nullptr);
void write_detections(const std::filesystem::path& path, std::span<const DetectionResult> results,
                      const Metadata& meta = {});
std::vector<DetectionResult> read_detections(const std::filesystem::path& path, Metadata* meta = nullptr);

void write_skips(const std::filesystem::path& path, std::span<const FitSkip> skips);

/// report.csv plus a plain-text table at `text_path`.
void write_report(const std::filesystem::path& csv_path, const std::filesystem::path& text_path,
                  const TrainReport& report, const Metadata& meta = {});
void write_report(std::ostream& csv, const TrainReport& report, const Metadata& meta = {});
void write_report_text(std::ostream& out, const TrainReport& report, const Metadata& meta = {});

}  // namespace cmfda
