#include "cli_app.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "cmfda/dataio.hpp"
#include "cmfda/online.hpp"
#include "cmfda/pipeline.hpp"
#include "cmfda/synth.hpp"
#include "cmfda/training.hpp"

namespace cmfda::cli {

namespace fs = std::filesystem;

void configure(CLI::App& app, RunConfig& cfg) {
    app.description("Harmonic-model deforestation detection on 16-day reflectance series");
    app.require_subcommand(1);
    app.set_config("--config", "", "Read flags from a key=value file");

    app.add_option("--series", cfg.series, "Series file")->capture_default_str();
    app.add_option("--labels", cfg.labels, "Labels file")->capture_default_str();
    app.add_option("--sites", cfg.sites, "Site type file")->capture_default_str();
    app.add_option("--models", cfg.models, "Directory of models_<window>.csv files")->capture_default_str();
    app.add_option("--out", cfg.out, "Output directory or file")->capture_default_str();
    app.add_option("--state", cfg.state, "Online state directory")->capture_default_str();
    app.add_option("--detections", cfg.detections, "Detections file")->capture_default_str();
    app.add_option("--standardizer", cfg.standardizer, "Saved standardizer to apply instead of fitting one");

    app.add_option("--scenario", cfg.scenario, "sonora-like, yucatan-like or all")->capture_default_str();
    app.add_option("--events", cfg.events, "Deforestation events per simulated site")->capture_default_str();
    app.add_option("--noise-scale", cfg.noise_scale, "Multiplier on simulated noise")->capture_default_str();
    app.add_option("--first-year", cfg.first_year, "First simulated year")->capture_default_str();
    app.add_option("--last-year", cfg.last_year, "Last simulated year")->capture_default_str();

    app.add_option("--rule", cfg.rule, "univariate, multivariate or mahalanobis")
        ->check(CLI::IsMember({"univariate", "multivariate", "mahalanobis"}))
        ->capture_default_str();
    app.add_option("--band", cfg.band, "Band of the univariate rule")->capture_default_str();
    auto* l = app.add_option("--L", cfg.L, "Threshold of univariate or Mahalanobis rules");
    auto* ln = app.add_option("--L-nir", cfg.L_nir, "NIR threshold of the multivariate rule")->capture_default_str();
    auto* ld = app.add_option("--L-ndvi", cfg.L_ndvi, "NDVI threshold of the multivariate rule")->capture_default_str();
    l->excludes(ln)->excludes(ld);
    app.add_option("--consec", cfg.consec, "Consecutive violations C")
        ->check(CLI::Range(kMinConsec, kMaxConsec))
        ->capture_default_str();
    app.add_option("--scheme", cfg.scheme, "Standardization scheme code")->capture_default_str();

    app.add_option("--windows", cfg.windows, "Number of training windows")->capture_default_str();
    app.add_option("--first-train-year", cfg.first_train_year, "First training year (default: first data year)");
    app.add_option("--predict-year", cfg.predict_year, "Online monitoring year (default: last data year)");
    app.add_option("--policy", cfg.policy, "Online model policy: refit or fixed-models")->capture_default_str();

    app.add_option("--cv-folds", cfg.cv_folds, "Cross-validation folds (0 disables)")->capture_default_str();
    app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    app.add_option("--grid", cfg.grid, "Threshold grid, first:last:step or a comma list");
    app.add_option("--grid-nir", cfg.grid_nir, "NIR grid of the multivariate rule");
    app.add_option("--grid-ndvi", cfg.grid_ndvi, "NDVI grid of the multivariate rule");
    app.add_option("--anneal-iters", cfg.anneal_iters, "Annealing iterations")->capture_default_str();
    app.add_option("--threads", cfg.threads, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_option("--save-config", cfg.save_config, "Write the effective flags to a config file")
        ->configurable(false);

    const std::pair<const char*, const char*> subs[] = {
        {"simulate", "Write synthetic series, labels and land use"},
        {"fit", "Fit harmonic models per training window"},
        {"detect", "Apply a fixed rule to prediction errors"},
        {"train", "Optimize thresholds and report skill"},
        {"online", "Process new dates incrementally"},
        {"standardize", "Fit and save a standardizer"},
        {"report", "Score detections against labels"},
    };
    for (const auto& [name, desc] : subs) {
        auto* sub = app.add_subcommand(name, desc);
        sub->fallthrough();
        sub->callback([&cfg, n = std::string(name)] { cfg.subcommand = n; });
    }
}

std::string config_text(const CLI::App& app) {
    const bool single_threshold = app.count("--L") > 0;
    std::stringstream in(app.config_to_str(true, false));
    std::string out;
    for (std::string line; std::getline(in, line);) {
        if (line.size() >= 3 && line.compare(line.size() - 3, 3, "=\"\"") == 0) continue;
        if (single_threshold && (line.rfind("L-nir=", 0) == 0 || line.rfind("L-ndvi=", 0) == 0)) continue;
        out += line + '\n';
    }
    return out;
}

std::vector<double> parse_grid(const std::string& text) {
    if (text.empty()) return {};
    auto number = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidConfig, "bad grid value '" + s + "'");
        }
    };
    std::vector<std::string> parts;
    char sep = text.find(':') != std::string::npos ? ':' : ',';
    std::stringstream ss(text);
    for (std::string tok; std::getline(ss, tok, sep);) parts.push_back(tok);
    if (sep == ':') {
        if (parts.size() != 3) throw Error(ErrorCode::InvalidConfig, "grid range needs first:last:step");
        return make_grid(number(parts[0]), number(parts[1]), number(parts[2]));
    }
    std::vector<double> g;
    for (const auto& p : parts) g.push_back(number(p));
    std::sort(g.begin(), g.end());
    return g;
}

DetectionRule rule_from_config(const RunConfig& cfg, std::shared_ptr<const CubeCovarianceTable> cov) {
    switch (parse_rule_kind(cfg.rule)) {
        case RuleKind::Univariate: return DetectionRule::univariate(parse_band(cfg.band), cfg.L.value_or(0.08), cfg.consec);
        case RuleKind::Multivariate: return DetectionRule::multivariate(cfg.L_nir, cfg.L_ndvi, cfg.consec);
        case RuleKind::Mahalanobis:
            return DetectionRule::mahalanobis(cfg.L.value_or(kDefaultMahalanobisThreshold), std::move(cov), cfg.consec);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown rule");
}

namespace {

std::vector<ModelFile> load_model_dir(const fs::path& dir) {
    std::vector<ModelFile> files;
    for (int j = 1;; ++j) {
        const auto p = dir / ("models_" + std::to_string(j) + ".csv");
        if (!fs::exists(p)) break;
        files.push_back(load_models(p));
    }
    if (files.empty()) throw Error(ErrorCode::Io, "no models_<window>.csv files in " + dir.string());
    return files;
}

std::vector<WindowPair> windows_of(std::span<const ModelFile> files) {
    std::vector<WindowPair> w;
    for (const auto& f : files) w.push_back(f.window);
    return w;
}

std::vector<std::vector<WindowModels>> align_models(std::span<const PixelSeries> pixels,
                                                    std::span<const ModelFile> files) {
    const auto by_pixel = models_by_pixel(files);
    std::vector<std::vector<WindowModels>> out;
    for (const auto& p : pixels) {
        const auto it = by_pixel.find(p.pixel_id);
        out.push_back(it == by_pixel.end() ? std::vector<WindowModels>(files.size()) : it->second);
    }
    return out;
}

struct Prepared {
    std::vector<PixelSeries> pixels;
    std::vector<ModelFile> files;
    std::vector<PixelErrors> errors;
};

// Series + models -> prediction errors, standardized when a scheme is set.
Prepared prepare(const RunConfig& cfg) {
    Prepared p;
    p.pixels = read_series(fs::path(cfg.series));
    p.files = load_model_dir(cfg.models);
    const auto windows = windows_of(p.files);
    p.errors = errors_all(p.pixels, windows, align_models(p.pixels, p.files), cfg.threads);

    const Scheme scheme = parse_scheme(cfg.scheme);
    if (!cfg.standardizer.empty()) {
        const auto set = load_standardizer(fs::path(cfg.standardizer));
        for (auto& e : p.errors) e = standardize(e, set);
    } else if (scheme != Scheme::Identity) {
        const Band bands[] = {Band::NIR, Band::NDVI};
        const auto set = fit_standardizers(p.errors, scheme, bands);
        for (auto& e : p.errors) e = standardize(e, set);
    }
    return p;
}

std::shared_ptr<const CubeCovarianceTable> covariances_for(const RunConfig& cfg, std::span<const PixelErrors> errors) {
    if (parse_rule_kind(cfg.rule) != RuleKind::Mahalanobis) return nullptr;
    return std::make_shared<const CubeCovarianceTable>(estimate_cube_covariances(covariance_records(errors)));
}

Metadata rule_meta(const RunConfig& cfg, const DetectionRule& rule) {
    return {{"rule", rule.describe()}, {"scheme", std::string(scheme_code(parse_scheme(cfg.scheme)))}};
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg) {
    std::vector<std::string> names = cfg.scenario == "all" ? scenario_names() : std::vector<std::string>{cfg.scenario};
    std::vector<PixelSeries> pixels;
    std::vector<DeforestationLabel> labels;
    std::map<std::string, DefoType> sites;
    const fs::path out(cfg.out);
    for (std::size_t k = 0; k < names.size(); ++k) {
        auto sc = scenario(names[k], cfg.seed + k, cfg.events, cfg.noise_scale);
        sc.first_year = cfg.first_year;
        sc.last_year = cfg.last_year;
        const auto site = generate_site(sc);
        pixels.insert(pixels.end(), site.grid.pixels().begin(), site.grid.pixels().end());
        labels.insert(labels.end(), site.labels.begin(), site.labels.end());
        sites[sc.site_id] = sc.defo_type;
        for (const auto* g : {&site.landuse_t0, &site.landuse_t1})
            write_landuse(out / sc.site_id / ("landuse_" + std::to_string(g->epoch()) + ".csv"), *g);
    }
    write_series(out / "series.csv", pixels);
    write_labels(out / "labels.csv", labels);
    write_sites(out / "sites.csv", sites);
    std::cout << "simulated " << sites.size() << " site(s), " << pixels.size() << " pixels into " << out.string()
              << '\n';
    return kOk;
}

int cmd_fit(const RunConfig& cfg) {
    const auto pixels = read_series(fs::path(cfg.series));
    if (pixels.empty() || pixels.front().observations.empty())
        throw Error(ErrorCode::InsufficientData, "series file holds no observations");
    int first = pixels.front().observations.front().nominal.year;
    for (const auto& p : pixels)
        if (!p.observations.empty()) first = std::min(first, p.observations.front().nominal.year);
    const auto windows = make_windows(cfg.first_train_year.value_or(first), cfg.windows);

    std::vector<FitSkip> skips;
    const auto models = fit_all(pixels, windows, kAllBands, FitOptions{}, cfg.threads, &skips);
    const fs::path out(cfg.out);
    const auto files = to_model_files(pixels, windows, models);
    for (const auto& f : files) save_models(out / ("models_" + std::to_string(f.window.index) + ".csv"), f);
    write_skips(out / "skipped.csv", skips);
    std::cout << "fitted " << files.size() << " window(s); " << skips.size() << " fit(s) skipped\n";
    return kOk;
}

int cmd_detect(const RunConfig& cfg) {
    const auto p = prepare(cfg);
    const auto rule = rule_from_config(cfg, covariances_for(cfg, p.errors));
    const auto results = detect_all(rule, p.errors, cfg.threads);
    const auto flagged = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.flagged; });
    const fs::path out = fs::path(cfg.out) / cfg.detections;
    write_detections(out, results, rule_meta(cfg, rule));
    std::cout << rule.describe() << ": " << flagged << " of " << results.size() << " pixels flagged\n";
    return kOk;
}

std::vector<LabeledPixel> join_labels(std::span<const PixelErrors> errors, std::span<const DeforestationLabel> labels) {
    std::map<PixelId, bool> z;
    for (const auto& l : labels) z[l.pixel_id] = l.z;
    std::vector<LabeledPixel> data;
    for (const auto& e : errors) {
        const auto it = z.find(e.pixel_id);
        if (it == z.end()) throw Error(ErrorCode::KeyMismatch, "pixel " + e.pixel_id + " has no label");
        data.push_back({std::make_shared<const PixelErrors>(e), it->second});
    }
    return data;
}

int cmd_train(const RunConfig& cfg) {
    const auto p = prepare(cfg);
    const auto data = join_labels(p.errors, read_labels(fs::path(cfg.labels)));

    TrainOptions opts;
    opts.kind = parse_rule_kind(cfg.rule);
    opts.band = parse_band(cfg.band);
    opts.grid = parse_grid(cfg.grid);
    opts.grid_nir = parse_grid(cfg.grid_nir);
    opts.grid_ndvi = parse_grid(cfg.grid_ndvi);
    opts.covariances = covariances_for(cfg, p.errors);
    opts.anneal.iterations = cfg.anneal_iters;
    opts.cv_folds = cfg.cv_folds;
    opts.seed = cfg.seed;
    opts.threads = cfg.threads;
    if (fs::exists(cfg.sites)) opts.site_types = read_sites(fs::path(cfg.sites));

    const auto report = train(data, opts);
    const Metadata meta{{"scheme", std::string(scheme_code(parse_scheme(cfg.scheme)))},
                        {"cv_folds", std::to_string(cfg.cv_folds)},
                        {"seed", std::to_string(cfg.seed)}};
    const fs::path out(cfg.out);
    write_report(out / "report.csv", out / "report.txt", report, meta);
    write_report_text(std::cout, report, meta);
    return kOk;
}

int cmd_online(const RunConfig& cfg) {
    if (parse_scheme(cfg.scheme) != Scheme::Identity || !cfg.standardizer.empty())
        throw Error(ErrorCode::InvalidConfig, "online monitoring works on raw prediction errors");
    auto pixels = read_series(fs::path(cfg.series));
    int last_year = 0;
    for (const auto& p : pixels)
        if (!p.observations.empty()) last_year = std::max(last_year, p.observations.back().nominal.year);
    const int year = cfg.predict_year.value_or(last_year);

    OnlineConfig oc;
    oc.period = window_for_prediction_year(year);
    oc.policy = parse_online_policy(cfg.policy);
    oc.threads = cfg.threads;

    std::shared_ptr<const CubeCovarianceTable> cov;
    std::map<PixelId, WindowModels> fixed;
    const bool need_models = oc.policy == OnlinePolicy::FixedModels || parse_rule_kind(cfg.rule) == RuleKind::Mahalanobis;
    if (need_models) {
        const auto files = load_model_dir(cfg.models);
        const auto windows = windows_of(files);
        const auto aligned = align_models(pixels, files);
        const auto errors = errors_all(pixels, windows, aligned, cfg.threads);
        cov = covariances_for(cfg, errors);
        const auto w = std::find_if(windows.begin(), windows.end(),
                                    [&](const WindowPair& x) { return x.predict_year.first.year == year; });
        if (oc.policy == OnlinePolicy::FixedModels) {
            if (w == windows.end())
                throw Error(ErrorCode::InvalidConfig, "no model file predicts " + std::to_string(year));
            oc.period = *w;
            for (std::size_t i = 0; i < pixels.size(); ++i)
                fixed[pixels[i].pixel_id] = aligned[i][static_cast<std::size_t>(w - windows.begin())];
        }
    }
    oc.rule = rule_from_config(cfg, cov);

    OnlineMonitor monitor(oc, std::move(pixels));
    if (oc.policy == OnlinePolicy::FixedModels) monitor.set_models(std::move(fixed));

    const fs::path state(cfg.state);
    const auto state_file = state / "flagged.csv";
    if (fs::exists(state_file)) {
        Metadata meta;
        const auto prior = read_detections(state_file, &meta);
        std::optional<Date> last;
        if (auto it = meta.find("last_processed"); it != meta.end() && !it->second.empty())
            last = Date::parse(it->second);
        monitor.restore(prior, last);
    }

    const auto fresh = monitor.replay();

    std::vector<DetectionResult> all;
    for (const auto& [id, d] : monitor.flagged()) all.push_back(d);
    Metadata meta = rule_meta(cfg, oc.rule);
    meta["policy"] = std::string(to_string(oc.policy));
    meta["last_processed"] = monitor.last_processed() ? monitor.last_processed()->iso() : "";
    write_detections(state_file, all, meta);

    ModelFile latest{oc.period, {}};
    for (const auto& [id, ms] : monitor.latest_models()) latest.models.insert(latest.models.end(), ms.begin(), ms.end());
    if (oc.policy == OnlinePolicy::Refit) save_models(state / "models_latest.csv", latest);

    write_detections(fs::path(cfg.out) / cfg.detections, fresh, meta);
    std::cout << fresh.size() << " new flag(s); " << all.size() << " pixel(s) flagged in total\n";
    return kOk;
}

int cmd_standardize(const RunConfig& cfg) {
    const auto pixels = read_series(fs::path(cfg.series));
    const auto files = load_model_dir(cfg.models);
    const auto errors = errors_all(pixels, windows_of(files), align_models(pixels, files), cfg.threads);
    const Band bands[] = {Band::NIR, Band::NDVI};
    const auto set = fit_standardizers(errors, parse_scheme(cfg.scheme), bands);
    const fs::path out = fs::path(cfg.out) / "standardizer.csv";
    save_standardizer(out, set);
    std::cout << "standardizer " << scheme_code(parse_scheme(cfg.scheme)) << " written to " << out.string() << '\n';
    return kOk;
}

// Recovers C and thresholds from a rule description such as "multivariate L_nir=0.082 L_ndvi=0.182 C=4".
void read_rule_description(const std::string& text, RuleKind& kind, TrainRow& row) {
    std::istringstream in(text);
    std::string tok;
    if (in >> tok && (tok == "univariate" || tok == "multivariate" || tok == "mahalanobis"))
        kind = parse_rule_kind(tok);
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto value = tok.substr(eq + 1);
        if (key == "C") row.consec = std::stoi(value);
        else if (key == "L" || key == "L_nir" || key == "L_ndvi") row.thresholds.push_back(std::stod(value));
    }
}

int cmd_report(const RunConfig& cfg) {
    Metadata meta;
    const auto dets = read_detections(fs::path(cfg.detections), &meta);
    const auto labels = read_labels(fs::path(cfg.labels));
    std::map<PixelId, bool> preds, obs;
    for (const auto& d : dets) preds[d.pixel_id] = d.flagged;
    for (const auto& l : labels) obs[l.pixel_id] = l.z;
    const auto c = confusion(preds, obs);

    TrainRow row{"all", "evaluated", 0, {}, c, {}, {}, {}, {}};
    if (c.N0() > 0 && c.N1() > 0) row.train_tss = tss(c);
    if (c.N1() > 0) row.producer_accuracy = accuracies(c).producer;
    if (c.R() > 0) row.user_accuracy = user_accuracy(c);
    TrainReport report{RuleKind::Univariate, meta.count("rule") ? meta.at("rule") : "unknown", {}};
    if (meta.count("rule")) read_rule_description(meta.at("rule"), report.kind, row);
    report.rows.push_back(row);
    const fs::path out(cfg.out);
    write_report(out / "report.csv", out / "report.txt", report, meta);
    write_report_text(std::cout, report, meta);
    return kOk;
}

}  // namespace

int execute(const RunConfig& cfg) {
    if (cfg.subcommand == "simulate") return cmd_simulate(cfg);
    if (cfg.subcommand == "fit") return cmd_fit(cfg);
    if (cfg.subcommand == "detect") return cmd_detect(cfg);
    if (cfg.subcommand == "train") return cmd_train(cfg);
    if (cfg.subcommand == "online") return cmd_online(cfg);
    if (cfg.subcommand == "standardize") return cmd_standardize(cfg);
    if (cfg.subcommand == "report") return cmd_report(cfg);
    throw Error(ErrorCode::InvalidConfig, "unknown subcommand '" + cfg.subcommand + "'");
}

int run(int argc, const char* const* argv) {
    CLI::App app;
    RunConfig cfg;
    configure(app, cfg);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }
    try {
        if (!cfg.save_config.empty()) {
            std::ofstream out(cfg.save_config);
            out << config_text(app);
            if (!out) throw Error(ErrorCode::Io, "cannot write " + cfg.save_config);
        }
        return execute(cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.code()) {
            case ErrorCode::InvalidConfig: return kUsage;
            case ErrorCode::DegenerateClass:
            case ErrorCode::TooFewPositives:
            case ErrorCode::NoPositivePredictions:
            case ErrorCode::InitOffGrid: return kDegenerateTraining;
            default: return kDataError;
        }
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
}

}  // namespace cmfda::cli
