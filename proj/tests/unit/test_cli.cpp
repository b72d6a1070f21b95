#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli_app.hpp"
#include "cmfda/dataio.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace cmfda;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "cmfda");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

// Runs the installed executable so exit statuses are observed as a shell
// would see them.
int run_binary(const std::string& args) {
    const char* bin = std::getenv("CMFDA_BIN");
    REQUIRE(bin != nullptr);
    const int status = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

cli::RunConfig parse(std::vector<std::string> args) {
    CLI::App app;
    cli::RunConfig cfg;
    cli::configure(app, cfg);
    args.insert(args.begin(), "cmfda");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Simulated data plus fitted models in `dir`.
void prepare(const TempDir& dir, int events = 30) {
    const auto d = dir.path().string();
    REQUIRE(run_args({"simulate", "--out", d, "--events", std::to_string(events), "--first-year", "2003",
                      "--last-year", "2008"}) == 0);
    REQUIRE(run_args({"fit", "--series", d + "/series.csv", "--out", d + "/models", "--windows", "4"}) == 0);
}

std::vector<std::string> data_flags(const TempDir& dir) {
    const auto d = dir.path().string();
    return {"--series", d + "/series.csv", "--models", d + "/models", "--labels", d + "/labels.csv",
            "--sites",  d + "/sites.csv"};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_CASE("defaults carry the operational rule constants") {
    const auto cfg = parse({"detect"});
    CHECK(cfg.subcommand == "detect");
    CHECK(cfg.L_nir == 0.082);
    CHECK(cfg.L_ndvi == 0.182);
    CHECK(cfg.consec == 4);
    CHECK(cfg.scheme == "---");

    const auto rule = cli::rule_from_config(cfg);
    const auto& m = std::get<MultivariateRule>(rule.rule());
    CHECK(m.threshold_nir == 0.082);
    CHECK(m.threshold_ndvi == 0.182);
    CHECK(rule.consec() == 4);

    auto mcfg = parse({"detect", "--rule", "mahalanobis"});
    const auto mrule = cli::rule_from_config(mcfg, std::make_shared<CubeCovarianceTable>());
    CHECK(std::get<MahalanobisRule>(mrule.rule()).threshold == 11.72);
    CHECK(mrule.consec() == 4);
}

TEST_CASE("a config file reproduces the command line") {
    TempDir dir;
    const auto file = dir / "run.ini";
    {
        std::ofstream out(file);
        out << "rule=univariate\nband=ndvi\nL=0.15\nconsec=3\nscheme=4c\nseed=17\ngrid=0.01:0.3:0.01\n";
    }
    const auto from_file = parse({"--config", file.string(), "train"});
    const auto from_args = parse({"train", "--rule", "univariate", "--band", "ndvi", "--L", "0.15", "--consec", "3",
                                  "--scheme", "4c", "--seed", "17", "--grid", "0.01:0.3:0.01"});
    for (const auto* c : {&from_file, &from_args}) {
        CHECK(c->rule == "univariate");
        CHECK(c->band == "ndvi");
        CHECK(c->L == 0.15);
        CHECK(c->consec == 3);
        CHECK(c->scheme == "4c");
        CHECK(c->seed == 17);
        CHECK(cli::parse_grid(c->grid).size() == 30);
    }

    // The effective configuration, written out and read back, is the same
    // configuration.
    for (const std::vector<std::string>& args :
         {std::vector<std::string>{"detect", "--consec", "5"},
          std::vector<std::string>{"train", "--rule", "univariate", "--L", "0.15", "--grid", "0.01:0.3:0.01"},
          std::vector<std::string>{"online", "--rule", "mahalanobis", "--predict-year", "2008", "--threads", "2"}}) {
        CLI::App app;
        cli::RunConfig cfg;
        cli::configure(app, cfg);
        std::vector<const char*> argv{"cmfda"};
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
        {
            std::ofstream out(dir / "dump.ini");
            out << cli::config_text(app);
        }
        const auto back = parse({"--config", (dir / "dump.ini").string(), args[0]});
        CHECK(back.rule == cfg.rule);
        CHECK(back.L == cfg.L);
        CHECK(back.L_nir == cfg.L_nir);
        CHECK(back.L_ndvi == cfg.L_ndvi);
        CHECK(back.consec == cfg.consec);
        CHECK(back.grid == cfg.grid);
        CHECK(back.predict_year == cfg.predict_year);
        CHECK(back.first_train_year == cfg.first_train_year);
        CHECK(back.threads == cfg.threads);
        CHECK(back.scheme == cfg.scheme);
        CHECK(back.seed == cfg.seed);
        CHECK(back.out == cfg.out);
    }

    const auto dump = (dir / "saved.ini").string();
    CHECK(run_args({"detect", "--series", (dir / "none.csv").string(), "--save-config", dump}) == 2);
    const auto text = slurp(dump);
    CHECK(text.find("L-nir=0.082") != std::string::npos);
    CHECK(text.find("L-ndvi=0.182") != std::string::npos);
    CHECK(text.find("consec=4") != std::string::npos);
    CHECK(text.find("save-config") == std::string::npos);
}

TEST_CASE("grid parsing") {
    CHECK(cli::parse_grid("").empty());
    CHECK(cli::parse_grid("0.3,0.1,0.2") == std::vector<double>{0.1, 0.2, 0.3});
    const auto g = cli::parse_grid("0.02:0.1:0.02");
    REQUIRE(g.size() == 5);
    CHECK(g.back() == doctest::Approx(0.1));
    CHECK_THROWS_AS(cli::parse_grid("0.1:x:0.1"), Error);
    CHECK_THROWS_AS(cli::parse_grid("0.1:0.2"), Error);
}

TEST_CASE("exit statuses") {
    TempDir dir;
    const auto d = dir.path().string();
    CHECK(run_binary("--help") == 0);
    CHECK(run_binary("") == 1);
    CHECK(run_binary("detect --bogus") == 1);
    CHECK(run_binary("detect --consec 9") == 1);
    CHECK(run_binary("detect --rule forest") == 1);
    CHECK(run_binary("detect --L 0.1 --L-nir 0.1") == 1);
    CHECK(run_binary("detect --series " + d + "/missing.csv") == 2);
    {
        std::ofstream bad(dir / "bad.csv");
        bad << "# cmfda series v1\nsite_id,pixel_id\n";
    }
    CHECK(run_binary("fit --series " + d + "/bad.csv --out " + d) == 2);

    // A site without events has no positive pixels to train on.
    CHECK(run_binary("simulate --events 0 --scenario sonora-like --first-year 2003 --last-year 2007 --out " + d) == 0);
    CHECK(run_binary("fit --windows 3 --series " + d + "/series.csv --out " + d + "/models") == 0);
    CHECK(run_binary("train --series " + d + "/series.csv --labels " + d + "/labels.csv --models " + d +
                     "/models --sites " + d + "/sites.csv --out " + d) == 3);
}

TEST_CASE("simulate, fit, detect, train and report") {
    TempDir dir;
    prepare(dir);
    const auto d = dir.path().string();

    for (int j = 1; j <= 4; ++j) CHECK(fs::exists(dir / ("models/models_" + std::to_string(j) + ".csv")));
    CHECK_FALSE(fs::exists(dir / "models/models_5.csv"));
    CHECK(fs::exists(dir / "models/skipped.csv"));
    CHECK(fs::exists(dir / "sonora/landuse_2005.csv"));
    CHECK(read_series(dir / "series.csv").size() == 2 * kSitePixels);

    REQUIRE(run_args(cat({"detect", "--out", d}, data_flags(dir))) == 0);
    Metadata meta;
    const auto dets = read_detections(dir / "detections.csv", &meta);
    CHECK(dets.size() == 2 * kSitePixels);
    CHECK(meta.at("rule").find("0.082") != std::string::npos);
    const auto flagged = std::count_if(dets.begin(), dets.end(), [](const auto& r) { return r.flagged; });
    CHECK(flagged > 20);

    REQUIRE(run_args(cat({"report", "--detections", d + "/detections.csv", "--out", d}, data_flags(dir))) == 0);
    CHECK(slurp(dir / "report.csv").find("all,evaluated,4,0.082,0.182,") != std::string::npos);

    fs::create_directories(dir / "train");
    REQUIRE(run_args(cat({"train", "--out", d + "/train", "--cv-folds", "3", "--anneal-iters", "300"},
                         data_flags(dir))) == 0);
    const auto rep = slurp(dir / "train/report.csv");
    CHECK(rep.find("# rule: multivariate") != std::string::npos);
    const auto rows = rep.substr(rep.find("scope,mode"));
    CHECK(std::count(rows.begin(), rows.end(), '\n') == 1 + 10);  // C = 2..6, optimized and fixed
    CHECK(fs::exists(dir / "train/report.txt"));

    fs::create_directories(dir / "uni");
    REQUIRE(run_args(cat({"train", "--rule", "univariate", "--out", d + "/uni", "--cv-folds", "0"},
                         data_flags(dir))) == 0);
    const auto uni = slurp(dir / "uni/report.csv");
    CHECK(uni.find("\nsonora,optimized,2,") != std::string::npos);
    CHECK(uni.find("\nyucatan,fixed,6,") != std::string::npos);
}

TEST_CASE("identity and saved standardizers do not change detections") {
    TempDir dir;
    prepare(dir);
    const auto d = dir.path().string();
    auto detect = [&](const std::string& name, std::vector<std::string> extra) {
        auto args = cat({"detect", "--out", d, "--detections", name}, data_flags(dir));
        REQUIRE(run_args(cat(args, extra)) == 0);
        return read_detections(dir / name);
    };
    const auto raw = detect("raw.csv", {});
    CHECK(detect("identity.csv", {"--scheme", "---"}) == raw);

    REQUIRE(run_args(cat({"standardize", "--scheme", "---", "--out", d}, data_flags(dir))) == 0);
    CHECK(detect("saved_identity.csv", {"--standardizer", d + "/standardizer.csv"}) == raw);

    // A scheme fitted on the fly and the same scheme loaded from disk agree.
    REQUIRE(run_args(cat({"standardize", "--scheme", "4c", "--out", d}, data_flags(dir))) == 0);
    const auto fitted = detect("fitted.csv", {"--scheme", "4c", "--L-nir", "1.5", "--L-ndvi", "1.5"});
    const auto loaded = detect("loaded.csv", {"--standardizer", d + "/standardizer.csv", "--L-nir", "1.5",
                                              "--L-ndvi", "1.5"});
    CHECK(fitted == loaded);
}

TEST_CASE("online runs resume from saved state") {
    TempDir dir;
    prepare(dir);
    const auto d = dir.path().string();
    auto online = cat({"online", "--out", d, "--state", d + "/state", "--predict-year", "2007"}, data_flags(dir));
    REQUIRE(run_args(online) == 0);
    Metadata meta;
    const auto first = read_detections(dir / "detections.csv", &meta);
    CHECK(!first.empty());
    CHECK(meta.at("last_processed").rfind("2008", 0) == 0);
    CHECK(fs::exists(dir / "state/models_latest.csv"));

    REQUIRE(run_args(online) == 0);
    CHECK(read_detections(dir / "detections.csv").empty());
    CHECK(read_detections(dir / "state/flagged.csv").size() == first.size());

    CHECK(run_args(cat(online, {"--scheme", "4c"})) == 1);
    auto fixed = cat({"online", "--out", d, "--state", d + "/state2", "--predict-year", "2004", "--policy",
                      "fixed-models"},
                     data_flags(dir));
    CHECK(run_args(fixed) == 1);
}
