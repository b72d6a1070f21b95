#include "cmfda/dataio.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace cmfda {

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace {

// Standardizer samples are compared against the very errors they were built
// from, so they must read back bit for bit.
std::string format_exact(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Line-oriented reader with position tracking
// ---------------------------------------------------------------------------

class CsvReader {
public:
    CsvReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

    /// Consumes the version line, metadata lines and the column line.
    Metadata open(std::string_view kind, std::string_view columns) {
        std::string line;
        if (!next_raw(line)) throw fail(0, "empty file, expected a '# cmfda " + std::string(kind) + "' header");
        const std::string prefix = "# cmfda " + std::string(kind) + " v";
        if (line.rfind(prefix, 0) != 0) throw fail(0, "expected header '" + prefix + "N'");
        int version = 0;
        const char* first = line.data() + prefix.size();
        const char* last = line.data() + line.size();
        auto [p, ec] = std::from_chars(first, last, version);
        if (ec != std::errc{} || p != last) throw fail(0, "malformed schema version");
        if (version != kSchemaVersion)
            throw Error(ErrorCode::SchemaVersionMismatch, name_ + ": schema version " + std::to_string(version) +
                                                              ", expected " + std::to_string(kSchemaVersion));
        Metadata meta;
        while (true) {
            if (!next_raw(line)) throw fail(0, "missing column line");
            if (line.rfind("# ", 0) != 0) break;
            const auto colon = line.find(": ");
            if (colon == std::string::npos) throw fail(0, "metadata line needs 'key: value'");
            meta[line.substr(2, colon - 2)] = line.substr(colon + 2);
        }
        if (line != columns) throw fail(0, "expected columns '" + std::string(columns) + "'");
        return meta;
    }

    /// Next record split on commas; false at end of input.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        if (!next_raw(line)) return false;
        fields.clear();
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return true;
    }

    void expect_fields(const std::vector<std::string>& f, std::size_t n) const {
        if (f.size() != n)
            throw fail(0, "expected " + std::to_string(n) + " fields, found " + std::to_string(f.size()));
    }

    ParseError fail(std::size_t column, const std::string& msg) const { return {name_, line_, column, msg}; }
    std::size_t line() const noexcept { return line_; }
    const std::string& name() const noexcept { return name_; }

    template <class T>
    T number(const std::vector<std::string>& f, std::size_t i) const {
        T v{};
        const std::string& s = f[i];
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
            throw fail(i + 1, "'" + s + "' is not a valid number");
        return v;
    }

    Date date(const std::vector<std::string>& f, std::size_t i) const {
        try {
            return Date::parse(f[i]);
        } catch (const Error& e) {
            throw fail(i + 1, e.what());
        }
    }

    // Runs `fn`, turning domain errors into a ParseError at `column`.
    template <class Fn>
    auto checked(std::size_t column, Fn&& fn) const {
        try {
            return fn();
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::SchemaVersionMismatch) throw;
            throw fail(column, e.what());
        }
    }

private:
    bool next_raw(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    std::istream& in_;
    std::string name_;
    std::size_t line_ = 0;
};

void write_header(std::ostream& out, std::string_view kind, const Metadata& meta, std::string_view columns) {
    out << "# cmfda " << kind << " v" << kSchemaVersion << '\n';
    for (const auto& [k, v] : meta) out << "# " << k << ": " << v << '\n';
    out << columns << '\n';
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    return in;
}

void finish(std::ostream& out, const fs::path& path) {
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

template <class Writer>
void write_file(const fs::path& path, Writer&& w) {
    auto out = open_out(path);
    w(out);
    finish(out, path);
}

template <class Reader>
auto read_file(const fs::path& path, Reader&& r) {
    auto in = open_in(path);
    return r(in, path.string());
}

constexpr std::string_view kSeriesColumns =
    "site_id,pixel_id,col,row,nominal_date,composite_doy,reliability,red,nir,blue,mir,ndvi,evi";
constexpr std::string_view kLabelColumns = "pixel_id,col,row,defo_count,z";
constexpr std::string_view kLanduseColumns = "col,row,class";
constexpr std::string_view kSiteColumns = "site_id,defo_type";
constexpr std::string_view kModelColumns = "pixel_id,band,a0,a1,a2,a3,a4,n_obs";
constexpr std::string_view kStandardizerColumns = "band,stage,entry,n,sd,values";
constexpr std::string_view kDetectionColumns = "pixel_id,flagged,first_flag_date,triggering_band";
constexpr std::string_view kReportColumns = "scope,mode,consec,L1,L2,S,T,U,V,train_tss,cv_tss,a_p,a_u";

std::string interval_text(const DateInterval& d) { return d.first.iso() + "/" + d.last.iso(); }

DateInterval parse_interval(const CsvReader& r, const std::string& text) {
    const auto slash = text.find('/');
    if (slash == std::string::npos) throw r.fail(0, "interval '" + text + "' needs first/last");
    return r.checked(0, [&] { return DateInterval{Date::parse(text.substr(0, slash)), Date::parse(text.substr(slash + 1))}; });
}

const std::string& require(const CsvReader& r, const Metadata& meta, const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw r.fail(0, "missing metadata '" + key + "'");
    return it->second;
}

int parse_int(const CsvReader& r, const std::string& text) {
    int v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || p != text.data() + text.size())
        throw r.fail(0, "'" + text + "' is not an integer");
    return v;
}

std::string optional_real(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

}  // namespace

// ---------------------------------------------------------------------------
// Series
// ---------------------------------------------------------------------------

void write_series(std::ostream& out, std::span<const PixelSeries> pixels) {
    write_header(out, "series", {}, kSeriesColumns);
    for (const auto& px : pixels) {
        for (const auto& o : px.observations) {
            out << px.site_id << ',' << px.pixel_id << ',' << px.col << ',' << px.row << ',' << o.nominal.iso() << ','
                << o.composite_doy << ',' << static_cast<int>(o.reliability);
            for (Band b : kAllBands) out << ',' << format_real(o.value(b));
            out << '\n';
        }
    }
}

std::vector<PixelSeries> read_series(std::istream& in, const std::string& name) {
    CsvReader r(in, name);
    r.open("series", kSeriesColumns);
    std::vector<PixelSeries> pixels;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::string> f;
    while (r.next(f)) {
        r.expect_fields(f, 13);
        Observation o;
        o.nominal = r.date(f, 4);
        o.composite_doy = r.number<int>(f, 5);
        const int rel = r.number<int>(f, 6);
        o.reliability = r.checked(7, [&] { return reliability_from_code(rel); });
        for (std::size_t i = 0; i < kBandCount; ++i) o.values[i] = r.number<double>(f, 7 + i);
        r.checked(0, [&] { validate(o); });

        auto [it, fresh] = index.try_emplace(f[1], pixels.size());
        if (fresh) {
            pixels.push_back({f[1], f[0], r.number<int>(f, 2), r.number<int>(f, 3), {}});
            const auto& px = pixels.back();
            if (px.col < 0 || px.col >= kSiteSide || px.row < 0 || px.row >= kSiteSide)
                throw r.fail(3, "pixel position outside the 25x25 grid");
        }
        auto& px = pixels[it->second];
        if (px.site_id != f[0]) throw r.fail(1, "pixel " + px.pixel_id + " changes site");
        if (px.col != r.number<int>(f, 2) || px.row != r.number<int>(f, 3))
            throw r.fail(3, "pixel " + px.pixel_id + " changes position");
        if (!px.observations.empty() && days_between(px.observations.back().nominal, o.nominal) != kDaysPerComposite)
            throw r.fail(5, "pixel " + px.pixel_id + ": " + o.nominal.iso() + " does not follow " +
                                px.observations.back().nominal.iso() + " by 16 days");
        px.observations.push_back(o);
    }
    return pixels;
}

void write_series(const fs::path& path, std::span<const PixelSeries> pixels) {
    write_file(path, [&](std::ostream& o) { write_series(o, pixels); });
}

std::vector<PixelSeries> read_series(const fs::path& path) {
    return read_file(path, [](std::istream& i, const std::string& n) { return read_series(i, n); });
}

// ---------------------------------------------------------------------------
// Labels, land use, sites
// ---------------------------------------------------------------------------

void write_labels(std::ostream& out, std::span<const DeforestationLabel> labels) {
    write_header(out, "labels", {}, kLabelColumns);
    for (const auto& l : labels)
        out << l.pixel_id << ',' << l.col << ',' << l.row << ',' << l.defo_count << ',' << (l.z ? 1 : 0) << '\n';
}

std::vector<DeforestationLabel> read_labels(std::istream& in, const std::string& name) {
    CsvReader r(in, name);
    r.open("labels", kLabelColumns);
    std::vector<DeforestationLabel> labels;
    std::vector<std::string> f;
    while (r.next(f)) {
        r.expect_fields(f, 5);
        const int z = r.number<int>(f, 4);
        if (z != 0 && z != 1) throw r.fail(5, "z must be 0 or 1");
        DeforestationLabel l{f[0], r.number<int>(f, 1), r.number<int>(f, 2), r.number<int>(f, 3), z == 1};
        r.checked(0, [&] { validate(l); });
        labels.push_back(std::move(l));
    }
    return labels;
}

void write_labels(const fs::path& path, std::span<const DeforestationLabel> labels) {
    write_file(path, [&](std::ostream& o) { write_labels(o, labels); });
}

std::vector<DeforestationLabel> read_labels(const fs::path& path) {
    return read_file(path, [](std::istream& i, const std::string& n) { return read_labels(i, n); });
}

void write_landuse(std::ostream& out, const LanduseFineGrid& grid) {
    write_header(out, "landuse", {{"epoch", std::to_string(grid.epoch())}, {"size", std::to_string(grid.cols()) + "x" + std::to_string(grid.rows())}},
                 kLanduseColumns);
    for (int row = 0; row < grid.rows(); ++row)
        for (int col = 0; col < grid.cols(); ++col) out << col << ',' << row << ',' << grid.at(col, row) << '\n';
}

LanduseFineGrid read_landuse(std::istream& in, const std::string& name) {
    CsvReader r(in, name);
    const auto meta = r.open("landuse", kLanduseColumns);
    const int epoch = parse_int(r, require(r, meta, "epoch"));
    const auto& size = require(r, meta, "size");
    int cols = 0, rows = 0;
    if (std::sscanf(size.c_str(), "%dx%d", &cols, &rows) != 2 || cols <= 0 || rows <= 0)
        throw r.fail(0, "malformed size '" + size + "'");
    std::vector<int> classes(static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows), 0);
    std::vector<std::string> f;
    while (r.next(f)) {
        r.expect_fields(f, 3);
        const int c = r.number<int>(f, 0), rw = r.number<int>(f, 1), cls = r.number<int>(f, 2);
        if (c < 0 || c >= cols || rw < 0 || rw >= rows) throw r.fail(1, "cell outside the grid");
        if (cls < kMinLanduseClass || cls > kMaxLanduseClass) throw r.fail(3, "class outside 1..19");
        auto& slot = classes[static_cast<std::size_t>(rw * cols + c)];
        if (slot != 0) throw r.fail(1, "duplicate cell");
        slot = cls;
    }
    for (int v : classes)
        if (v == 0) throw r.fail(0, "grid has missing cells");
    return {epoch, cols, rows, std::move(classes)};
}

void write_landuse(const fs::path& path, const LanduseFineGrid& grid) {
    write_file(path, [&](std::ostream& o) { write_landuse(o, grid); });
}

LanduseFineGrid read_landuse(const fs::path& path) {
    return read_file(path, [](std::istream& i, const std::string& n) { return read_landuse(i, n); });
}

void write_sites(const fs::path& path, const std::map<std::string, DefoType>& sites) {
    write_file(path, [&](std::ostream& out) {
        write_header(out, "sites", {}, kSiteColumns);
        for (const auto& [id, t] : sites) out << id << ',' << to_string(t) << '\n';
    });
}

std::map<std::string, DefoType> read_sites(const fs::path& path) {
    return read_file(path, [](std::istream& in, const std::string& name) {
        CsvReader r(in, name);
        r.open("sites", kSiteColumns);
        std::map<std::string, DefoType> sites;
        std::vector<std::string> f;
        while (r.next(f)) {
            r.expect_fields(f, 2);
            sites[f[0]] = r.checked(2, [&] { return parse_defo_type(f[1]); });
        }
        return sites;
    });
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

void save_models(std::ostream& out, const ModelFile& file) {
    const Metadata meta{{"window", std::to_string(file.window.index)},
                        {"train", interval_text(file.window.train)},
                        {"predict", interval_text(file.window.predict)},
                        {"predict_year", interval_text(file.window.predict_year)}};
    write_header(out, "models", meta, kModelColumns);
    for (const auto& m : file.models) {
        out << m.pixel_id << ',' << band_name(m.band);
        for (double a : m.coeffs) out << ',' << format_real(a);
        out << ',' << m.n_obs << '\n';
    }
}

ModelFile load_models(std::istream& in, const std::string& name) {
    CsvReader r(in, name);
    const auto meta = r.open("models", kModelColumns);
    ModelFile file;
    file.window.index = parse_int(r, require(r, meta, "window"));
    file.window.train = parse_interval(r, require(r, meta, "train"));
    file.window.predict = parse_interval(r, require(r, meta, "predict"));
    file.window.predict_year = parse_interval(r, require(r, meta, "predict_year"));
    std::vector<std::string> f;
    while (r.next(f)) {
        r.expect_fields(f, 8);
        HarmonicModel m;
        m.pixel_id = f[0];
        m.band = r.checked(2, [&] { return parse_band(f[1]); });
        for (std::size_t i = 0; i < 5; ++i) m.coeffs[i] = r.number<double>(f, 2 + i);
        m.n_obs = r.number<int>(f, 7);
        if (m.n_obs < 0) throw r.fail(8, "negative observation count");
        m.train_window = file.window.train;
        file.models.push_back(std::move(m));
    }
    return file;
}

void save_models(const fs::path& path, const ModelFile& file) {
    write_file(path, [&](std::ostream& o) { save_models(o, file); });
}

ModelFile load_models(const fs::path& path) {
    return read_file(path, [](std::istream& i, const std::string& n) { return load_models(i, n); });
}

std::map<PixelId, std::vector<WindowModels>> models_by_pixel(std::span<const ModelFile> files) {
    std::map<PixelId, std::vector<WindowModels>> out;
    for (std::size_t w = 0; w < files.size(); ++w) {
        for (const auto& m : files[w].models) {
            auto& per_window = out[m.pixel_id];
            per_window.resize(files.size());
            per_window[w][band_slot(m.band)] = m;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Standardizers
// ---------------------------------------------------------------------------

void save_standardizer(std::ostream& out, const StandardizerSet& set) {
    Metadata meta;
    std::string bands;
    for (const auto& [b, s] : set) {
        bands += (bands.empty() ? "" : ";") + std::string(band_name(b));
        meta["scheme"] = std::string(scheme_code(s.scheme));
    }
    meta["bands"] = bands;
    write_header(out, "standardizer", meta, kStandardizerColumns);
    for (const auto& [b, s] : set) {
        for (std::size_t i = 0; i < s.stages.size(); ++i) {
            // Sorted for stable output.
            std::map<std::string, const StageEntry*> ordered;
            for (const auto& [k, e] : s.stages[i].entries) ordered[k] = &e;
            for (const auto& [k, e] : ordered) {
                out << band_name(b) << ',' << i + 1 << ',' << k << ',' << e->n << ',' << format_exact(e->sd) << ',';
                for (std::size_t j = 0; j < e->sorted.size(); ++j) out << (j ? " " : "") << format_exact(e->sorted[j]);
                out << '\n';
            }
        }
    }
}

StandardizerSet load_standardizer(std::istream& in, const std::string& name) {
    CsvReader r(in, name);
    const auto meta = r.open("standardizer", kStandardizerColumns);
    StandardizerSet set;
    const auto& bands = require(r, meta, "bands");
    if (!bands.empty()) {
        const Scheme scheme = r.checked(0, [&] { return parse_scheme(require(r, meta, "scheme")); });
        const auto specs = stages_of(scheme);
        std::stringstream ss(bands);
        for (std::string tok; std::getline(ss, tok, ';');) {
            const Band b = r.checked(0, [&] { return parse_band(tok); });
            Standardizer s{scheme, b, {}};
            for (std::size_t i = 0; i < specs.size(); ++i) s.stages.push_back({specs[i], i + 1 == specs.size(), {}});
            set.emplace(b, std::move(s));
        }
    }
    std::vector<std::string> f;
    while (r.next(f)) {
        r.expect_fields(f, 6);
        const Band b = r.checked(1, [&] { return parse_band(f[0]); });
        const auto it = set.find(b);
        if (it == set.end()) throw r.fail(1, "band not listed in the header");
        const auto stage = r.number<std::size_t>(f, 1);
        if (stage < 1 || stage > it->second.stages.size()) throw r.fail(2, "stage outside the scheme");
        StageEntry e;
        e.n = r.number<long>(f, 3);
        e.sd = r.number<double>(f, 4);
        std::stringstream vs(f[5]);
        for (std::string tok; vs >> tok;) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || p != tok.data() + tok.size()) throw r.fail(6, "bad sample value '" + tok + "'");
            e.sorted.push_back(v);
        }
        it->second.stages[stage - 1].entries[f[2]] = std::move(e);
    }
    return set;
}

void save_standardizer(const fs::path& path, const StandardizerSet& set) {
    write_file(path, [&](std::ostream& o) { save_standardizer(o, set); });
}

StandardizerSet load_standardizer(const fs::path& path) {
    return read_file(path, [](std::istream& i, const std::string& n) { return load_standardizer(i, n); });
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

void write_detections(std::ostream& out, std::span<const DetectionResult> results, const Metadata& meta) {
    write_header(out, "detections", meta, kDetectionColumns);
    for (const auto& d : results) {
        out << d.pixel_id << ',' << (d.flagged ? 1 : 0) << ',' << (d.first_flag_date ? d.first_flag_date->iso() : "")
            << ',' << (d.triggering_band ? std::string(band_name(*d.triggering_band)) : "") << '\n';
    }
}

std::vector<DetectionResult> read_detections(std::istream& in, const std::string& name, Metadata* meta) {
    CsvReader r(in, name);
    auto m = r.open("detections", kDetectionColumns);
    if (meta) *meta = std::move(m);
    std::vector<DetectionResult> out;
    std::vector<std::string> f;
    while (r.next(f)) {
        r.expect_fields(f, 4);
        DetectionResult d;
        d.pixel_id = f[0];
        const int flagged = r.number<int>(f, 1);
        if (flagged != 0 && flagged != 1) throw r.fail(2, "flagged must be 0 or 1");
        d.flagged = flagged == 1;
        if (!f[2].empty()) d.first_flag_date = r.date(f, 2);
        if (!f[3].empty()) d.triggering_band = r.checked(4, [&] { return parse_band(f[3]); });
        if (d.flagged != d.first_flag_date.has_value()) throw r.fail(3, "flag date must be present iff flagged");
        out.push_back(std::move(d));
    }
    return out;
}

void write_detections(const fs::path& path, std::span<const DetectionResult> results, const Metadata& meta) {
    write_file(path, [&](std::ostream& o) { write_detections(o, results, meta); });
}

std::vector<DetectionResult> read_detections(const fs::path& path, Metadata* meta) {
    return read_file(path, [&](std::istream& i, const std::string& n) { return read_detections(i, n, meta); });
}

void write_skips(const fs::path& path, std::span<const FitSkip> skips) {
    write_file(path, [&](std::ostream& out) {
        write_header(out, "skips", {}, "pixel_id,window,band,reason");
        for (const auto& s : skips)
            out << s.pixel_id << ',' << s.window_index << ',' << band_name(s.band) << ',' << to_string(s.reason) << '\n';
    });
}

void write_report(std::ostream& out, const TrainReport& report, const Metadata& meta) {
    Metadata m = meta;
    m["rule"] = report.rule;
    write_header(out, "report", m, kReportColumns);
    for (const auto& row : report.rows) {
        out << row.scope << ',' << row.mode << ',' << row.consec << ','
            << (row.thresholds.size() > 0 ? format_real(row.thresholds[0]) : "") << ','
            << (row.thresholds.size() > 1 ? format_real(row.thresholds[1]) : "") << ',' << row.counts.S << ','
            << row.counts.T << ',' << row.counts.U << ',' << row.counts.V << ',' << optional_real(row.train_tss) << ','
            << optional_real(row.cv_tss) << ',' << optional_real(row.producer_accuracy) << ','
            << optional_real(row.user_accuracy) << '\n';
    }
}

void write_report_text(std::ostream& out, const TrainReport& report, const Metadata& meta) {
    out << "Training report: " << report.rule << '\n';
    for (const auto& [k, v] : meta) out << "  " << k << ": " << v << '\n';
    auto cell = [](const std::optional<double>& v) {
        char buf[16];
        if (!v) return std::string("     -");
        std::snprintf(buf, sizeof buf, "%6.3f", *v);
        return std::string(buf);
    };
    std::string scope;
    for (const auto& row : report.rows) {
        if (row.scope != scope) {
            scope = row.scope;
            out << "\n[" << scope << "]\n  mode       C  thresholds          tss  cv_tss     a_p     a_u\n";
        }
        std::string th;
        for (double t : row.thresholds) th += (th.empty() ? "" : ", ") + format_real(t);
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-9s %2d  %-16s %s  %s  %s  %s\n", row.mode.c_str(), row.consec, th.c_str(),
                      cell(row.train_tss).c_str(), cell(row.cv_tss).c_str(), cell(row.producer_accuracy).c_str(),
                      cell(row.user_accuracy).c_str());
        out << buf;
    }
}

void write_report(const fs::path& csv_path, const fs::path& text_path, const TrainReport& report,
                  const Metadata& meta) {
    write_file(csv_path, [&](std::ostream& o) { write_report(o, report, meta); });
    write_file(text_path, [&](std::ostream& o) { write_report_text(o, report, meta); });
}

}  // namespace cmfda
