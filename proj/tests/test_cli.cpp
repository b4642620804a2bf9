#include "tklab/cli.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace tklab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Run {
    int code = -1;
    std::string out;
};

// Runs the built binary; stderr is discarded.
Run tklab_run(const std::string& args) {
    const std::string cmd = std::string("\"") + TKLAB_BINARY + "\" " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t got = 0;
    while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("tklab_test_" + name);
}

int column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

}  // namespace

TEST(Config, ParsesSchema) {
    const auto c = parse_config(Json::parse(R"({
        "potential": {"kind": "fubini_study", "n": 2, "params": {"scale": 2}},
        "region": ["-1:1:0.5", {"min": 0, "max": 2, "step": 1}],
        "quad_N": 64,
        "tolerances": {"psd": 1e-9, "convexity": 1e-5},
        "output": {"path": "out.json", "format": "json"},
        "seed": [0.5, -1]
    })"));
    ASSERT_TRUE(c.potential);
    EXPECT_EQ(c.potential->kind, "fubini_study");
    EXPECT_EQ(c.potential->n, 2);
    EXPECT_EQ(c.potential->params.at("scale"), 2.0);
    ASSERT_EQ(c.region.size(), 2u);
    EXPECT_EQ(c.region[1].samples().size(), 3u);
    EXPECT_EQ(c.quad_N, 64);
    EXPECT_EQ(c.tol_psd, 1e-9);
    EXPECT_EQ(c.format, OutputFormat::json);
    EXPECT_EQ(*c.out, "out.json");
    EXPECT_EQ(*c.seed, (std::vector<double>{0.5, -1.0}));
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, ParsesFieldDescriptors) {
    const auto c = parse_config(Json::parse(R"({
        "n": 2,
        "field": {"kind": "sum", "terms": [
            {"weight": 2, "field": {"kind": "laurent_abs2", "coeffs": [{"c": [1, 0.5], "k": [1, 0]}]}},
            {"field": {"kind": "pullback", "potential": "flat"}}
        ]}
    })"));
    ASSERT_TRUE(c.field);
    const auto f = make_periodic_field(*c.field);
    EXPECT_EQ(f.dimension(), 2);
    const Vec x = (Vec(2) << 0.3, -0.2).finished();
    const double expected = 2.0 * 1.25 * std::exp(0.6) + std::exp(0.6) + std::exp(-0.4);
    EXPECT_NEAR(f.value(x, Vec::Zero(2)), expected, 1e-13);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(parse_config(Json::parse(R"({"bogus": 1})")), InputError);
    EXPECT_THROW(parse_config(Json::parse(R"({"tolerances": {"psdd": 1}})")), InputError);
    EXPECT_THROW(parse_config(Json::parse(R"({"region": ["1:1:0.1"]})")), InputError);
    EXPECT_THROW(parse_config(Json::parse(R"({"region": ["0:1:0"]})")), InputError);
    EXPECT_THROW(parse_config(Json::parse(R"({"region": ["0:1"]})")), InputError);
    EXPECT_THROW(parse_config(Json::parse(R"({"field": {"kind": "nope"}})")), InputError);
    EXPECT_THROW(parse_config(Json::parse(R"({"output": {"format": "xml"}})")), InputError);
    EXPECT_THROW(parse_config(Json::parse(R"([1, 2])")), InputError);
    EXPECT_THROW(load_config("/nonexistent/tklab.json"), InputError);
    for (int N : {2, 48, 2048}) {
        RunConfig c;
        c.quad_N = N;
        EXPECT_THROW(validate(c), InputError) << N;
    }
    RunConfig c;
    c.region.push_back({1.0, 1.0, 0.1});
    EXPECT_THROW(validate(c), InputError);
}

TEST(Output, SeventeenDigits) {
    EXPECT_EQ(format_real(kPi), "3.1415926535897931");
    EXPECT_EQ(std::stod(format_real(0.1)), 0.1);
    Rng rng(kDefaultSeed);
    for (int s = 0; s < 1000; ++s) {
        const double v = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.uniform(-60.0, 60.0)));
        EXPECT_EQ(std::stod(format_real(v)), v);
    }
}

TEST(Output, ProfileCsvFlat) {
    const Grid g(std::vector<std::vector<double>>{{-1.0, 0.0, 1.0}});
    std::ostringstream os;
    emit_profile(sample_profile(make_builtin_potential("flat", 1), g), OutputFormat::csv, os);
    const auto rows = csv(os.str());
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"x1", "H", "vol", "logvol", "ric_min", "ric_max", "mu1"}));
    for (int i = 0; i < 3; ++i) {
        const double x = i - 1.0;
        EXPECT_NEAR(std::stod(rows[i + 1][2]), 2.0 * kPi * std::exp(x), 1e-12 * std::exp(x));
    }
}

TEST(Output, ProfileLexicographicN2) {
    const Grid g(std::vector<std::vector<double>>{{0.0, 1.0}, {-1.0, 0.0}});
    std::ostringstream os;
    emit_profile(sample_profile(make_builtin_potential("fubini_study", 2), g), OutputFormat::csv, os);
    const auto rows = csv(os.str());
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0].size(), 9u);
    const std::vector<std::pair<std::string, std::string>> order{{"0", "-1"}, {"0", "0"}, {"1", "-1"}, {"1", "0"}};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(rows[i + 1][0], order[i].first);
        EXPECT_EQ(rows[i + 1][1], order[i].second);
    }
}

TEST(Output, ProfileJsonMirrorsCsv) {
    const Grid g(std::vector<std::vector<double>>{{-0.5, 0.5}});
    const auto p = sample_profile(make_builtin_potential("cosh_neg", 1), g);
    std::ostringstream os;
    emit_profile(p, OutputFormat::json, os);
    const Json j = Json::parse(os.str());
    ASSERT_EQ(j.size(), 2u);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j[0].items()) keys.push_back(k);
    EXPECT_EQ(keys, profile_table(p).columns);
    EXPECT_EQ(j[1]["vol"].get<double>(), p.vol[1]);
    EXPECT_THROW(profile_table(OrbitProfile{}), InputError);
}

TEST(Output, RecordCsvExpandsVectors) {
    cli::Record r;
    r.set("x", to_json((Vec(2) << 0.5, -1.0).finished())).set("ok", true).set("tag", "linear");
    std::ostringstream os;
    r.write(os, OutputFormat::csv);
    EXPECT_EQ(os.str(), "x1,x2,ok,tag\n0.5,-1,true,linear\n");
}

TEST(Binary, VolumeFubiniStudy) {
    const auto r = tklab_run("volume --potential fubini_study --n 1 --range -5:5:0.05");
    ASSERT_EQ(r.code, 0);
    const auto rows = csv(r.out);
    ASSERT_EQ(rows.size(), 202u);
    const int vol = column(rows[0], "vol");
    ASSERT_GE(vol, 0);
    bool found = false;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (std::abs(std::stod(rows[i][0])) < 1e-12) {
            EXPECT_NEAR(std::stod(rows[i][vol]), kPi, 1e-9);
            found = true;
        }
    EXPECT_TRUE(found);
}

TEST(Binary, FlatVolumeToFile) {
    const auto path = temp_path("flat.csv");
    const auto r = tklab_run("volume --potential flat --n 1 --range -1:1:1 --out " + path.string());
    ASSERT_EQ(r.code, 0);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto rows = csv(ss.str());
    ASSERT_EQ(rows.size(), 4u);
    const int vol = column(rows[0], "vol");
    EXPECT_NEAR(std::stod(rows[1][vol]), 2.0 * kPi * std::exp(-1.0), 1e-13);
    EXPECT_NEAR(std::stod(rows[2][vol]), 2.0 * kPi, 1e-13);
    EXPECT_NEAR(std::stod(rows[3][vol]), 2.0 * kPi * std::exp(1.0), 1e-12);
    std::filesystem::remove(path);
}

TEST(Binary, JsonFormat) {
    const auto r = tklab_run("volume --potential flat --n 2 --range -1:0:1 --format json");
    ASSERT_EQ(r.code, 0);
    const Json j = Json::parse(r.out);
    ASSERT_EQ(j.size(), 4u);
    EXPECT_EQ(j[1]["x1"].get<double>(), -1.0);
    EXPECT_EQ(j[1]["x2"].get<double>(), 0.0);
}

TEST(Binary, RicciFlatIsZero) {
    const auto r = tklab_run("ricci --potential flat --n 1 --range -2:2:0.1");
    ASSERT_EQ(r.code, 0);
    const auto rows = csv(r.out);
    ASSERT_EQ(rows.size(), 42u);
    for (const char* name : {"ric_min", "ric_max"}) {
        const int c = column(rows[0], name);
        ASSERT_GE(c, 0);
        for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(std::abs(std::stod(rows[i][c])), 1e-8);
    }
}

TEST(Binary, ExitCodes) {
    EXPECT_EQ(tklab_run("").code, 2);
    EXPECT_EQ(tklab_run("nonsense").code, 2);
    EXPECT_EQ(tklab_run("volume --potential nope --n 1 --range 0:1:0.5").code, 2);
    EXPECT_EQ(tklab_run("volume --potential flat --n 1 --range 1:0:0.5").code, 2);
    EXPECT_EQ(tklab_run("volume --potential flat --n 1 --range 0:1:0.5 --out /nonexistent/dir/x.csv").code, 2);
    EXPECT_EQ(tklab_run("average --potential flat --n 1 --range 0:1:0.5 --quad-N 48").code, 2);
    EXPECT_EQ(tklab_run("volume --config /nonexistent/c.json").code, 2);
    EXPECT_EQ(tklab_run("decay --potential flat --n 1").code, 2);
    EXPECT_EQ(tklab_run("decay --potential fubini_study --n 1").code, 0);
    EXPECT_EQ(tklab_run("classify --potential cosh_neg --n 1 --range -3:3:0.05").code, 0);
    EXPECT_EQ(tklab_run("critical --potential fubini_study --n 2 --seed 1.2,-0.7").code, 0);
    EXPECT_EQ(tklab_run("moment --potential fubini_study --n 1 --range -8:8:0.5").code, 0);
    // Mathematical failures exit 1.
    EXPECT_EQ(tklab_run("volume --potential fubini_study --n 1 --param scale=-1 --range -1:1:0.5").code, 1);
    EXPECT_EQ(tklab_run("decay --potential fubini_study --n 1 --t-max 5").code, 1);
    EXPECT_EQ(tklab_run(R"(psh-check --field '{"kind":"pullback","potential":"fubini_study","params":{"scale":-1}}' --n 1 --range -1:1:0.5)")
                  .code,
              1);
}

TEST(Binary, Deterministic) {
    for (const char* args : {"classify --potential fs_quadratic --n 2 --range -2:2:0.1",
                             "average --field '{\"kind\":\"laurent_abs2\",\"coeffs\":[{\"c\":1,\"k\":[0]},{\"c\":1,\"k\":[1]}]}' "
                             "--n 1 --range -2:1:0.25"}) {
        const auto a = tklab_run(args), b = tklab_run(args);
        EXPECT_EQ(a.code, b.code);
        EXPECT_FALSE(a.out.empty());
        EXPECT_EQ(a.out, b.out) << args;
    }
}

TEST(Binary, FlagsOverrideConfig) {
    const auto path = temp_path("config.json");
    {
        std::ofstream out(path);
        out << R"({"potential": {"kind": "flat", "n": 1}, "region": ["-1:1:1"], "output": {"format": "json"}})";
    }
    const auto a = tklab_run("volume --config " + path.string());
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(Json::parse(a.out).size(), 3u);
    const auto b = tklab_run("volume --config " + path.string() + " --format csv --range 0:1:0.5");
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(csv(b.out).size(), 4u);
    std::filesystem::remove(path);
}

TEST(Binary, SamplesRun) {
    for (const auto& entry : std::filesystem::directory_iterator(TKLAB_SAMPLES)) {
        if (entry.path().extension() != ".json") continue;
        const std::string stem = entry.path().stem().string();
        std::string sub;
        for (const char* s : {"volume", "average", "levi", "classify", "critical", "decay"})
            if (stem.find(s) != std::string::npos) sub = s;
        ASSERT_FALSE(sub.empty()) << stem;
        const auto out = temp_path(stem + ".out");
        EXPECT_EQ(tklab_run(sub + " --config " + entry.path().string() + " --out " + out.string()).code, 0) << stem;
        std::filesystem::remove(out);
    }
}
