#include <doctest.h>

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "grcl/cli.hpp"
#include "grcl/data.hpp"
#include "grcl/rng.hpp"

using namespace grcl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        Rng rng(static_cast<std::uint64_t>(
            std::chrono::steady_clock::now().time_since_epoch().count()));
        path = fs::temp_directory_path() /
               ("grcl_cli_" + std::to_string(rng.uniform_below(1'000'000'000)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// Runs the CLI in-process. std::cout/std::cerr are captured; C stdio is not.
int run_cli(std::initializer_list<std::string> args, std::string* out = nullptr,
            std::string* err = nullptr) {
    std::vector<std::string> owned{"grcl"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<char*> argv;
    argv.reserve(owned.size());
    for (auto& a : owned) argv.push_back(a.data());

    std::ostringstream cap_out, cap_err;
    auto* old_out = std::cout.rdbuf(cap_out.rdbuf());
    auto* old_err = std::cerr.rdbuf(cap_err.rdbuf());
    int code = -1;
    try {
        code = cli::run(static_cast<int>(argv.size()), argv.data());
    } catch (...) {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        throw;
    }
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    if (out) *out = cap_out.str();
    if (err) *err = cap_err.str();
    return code;
}

std::vector<json> json_lines(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string make_interactions(const TempDir& tmp, std::uint64_t seed = 3) {
    const auto g = gen_planted_bipartite(40, 60, 2, 0.35, 0.02, seed);
    const auto path = tmp.file("inter.tsv");
    save_interactions(path, g);
    return path;
}

}  // namespace

TEST_CASE("cli rejects missing subcommands and unknown flags") {
    std::string out, err;
    CHECK(run_cli({}, &out, &err) == 1);
    CHECK(err.find("Usage") != std::string::npos);

    CHECK(run_cli({"train", "--bogus"}, &out, &err) == 1);
    CHECK(err.find("Usage") != std::string::npos);

    CHECK(run_cli({"train", "--data", "x.tsv", "--seed", "0", "--task", "weird"}) == 1);
    CHECK(run_cli({"frobnicate"}) == 1);
}

TEST_CASE("cli train and gen-synth require a seed") {
    TempDir tmp;
    const auto data = make_interactions(tmp);
    std::string err;
    CHECK(run_cli({"train", "--task", "rec", "--data", data, "--metadata",
                   tmp.file("m.json")},
                  nullptr, &err) == 1);
    CHECK(err.find("--seed") != std::string::npos);
    CHECK(run_cli({"gen-synth", "--kind", "planted", "--out", tmp.file("x.tsv"),
                   "--metadata", tmp.file("m.json")}) == 1);
}

TEST_CASE("cli gen-synth planted is deterministic and records metadata") {
    TempDir tmp;
    std::string out;
    const int code = run_cli({"gen-synth", "--kind", "planted", "--seed", "3", "--out",
                              tmp.file("a.tsv"), "--users", "30", "--items", "40",
                              "--blocks", "2", "--p-in", "0.4", "--p-out", "0.02",
                              "--metadata", tmp.file("meta.json")},
                             &out);
    REQUIRE(code == 0);
    const auto lines = json_lines(out);
    REQUIRE(lines.size() == 1);
    CHECK(lines[0].at("users") == 30);
    CHECK(lines[0].at("items") == 40);
    CHECK(lines[0].at("edges").get<std::int64_t>() > 0);

    const auto meta = json::parse(slurp(tmp.file("meta.json")));
    CHECK(meta.at("status") == "complete");
    CHECK(meta.at("command") == "gen-synth");
    CHECK(meta.at("timings_ms").contains("generate"));
    CHECK(meta.at("timings_ms").contains("total"));
    CHECK(meta.at("outputs").contains(tmp.file("a.tsv")));

    REQUIRE(run_cli({"gen-synth", "--kind", "planted", "--seed", "3", "--out",
                     tmp.file("b.tsv"), "--users", "30", "--items", "40", "--blocks",
                     "2", "--p-in", "0.4", "--p-out", "0.02", "--metadata",
                     tmp.file("meta2.json")}) == 0);
    CHECK(fnv1a64_file(tmp.file("a.tsv")) == fnv1a64_file(tmp.file("b.tsv")));
}

TEST_CASE("cli gen-synth csbm writes a loadable dataset directory") {
    TempDir tmp;
    const auto dir = tmp.file("csbm");
    REQUIRE(run_cli({"gen-synth", "--kind", "csbm", "--n", "60", "--p", "0.2", "--q",
                     "0.05", "--feat-dim", "3", "--mu", "0.5", "--nu", "-0.5", "--seed",
                     "7", "--out", dir, "--metadata", tmp.file("meta.json")}) == 0);
    const auto g = load_node_dataset(dir);
    CHECK(g.n == 60);
    REQUIRE(g.features.has_value());
    CHECK(g.features->cols == 3);
    CHECK(!g.labels.empty());

    // csbm needs explicit edge probabilities
    CHECK(run_cli({"gen-synth", "--kind", "csbm", "--n", "60", "--seed", "7", "--out",
                   tmp.file("c2"), "--metadata", tmp.file("m2.json")}) == 1);
}

TEST_CASE("cli train rec emits evaluation records and a loadable model") {
    TempDir tmp;
    const auto data = make_interactions(tmp);
    std::string out;
    const int code =
        run_cli({"train", "--task", "rec", "--loss", "bpr", "--data", data, "--seed",
                 "2", "--epochs", "6", "--eval-every", "3", "--dim", "8", "--batch",
                 "128", "--out", tmp.file("model.bin"), "--metrics",
                 tmp.file("metrics.jsonl"), "--metadata", tmp.file("meta.json")},
                &out);
    REQUIRE(code == 0);

    const auto recs = json_lines(out);
    REQUIRE(recs.size() == 2);  // epochs 3 and 6
    for (const auto& r : recs) {
        CHECK(r.contains("epoch"));
        CHECK(r.contains("recall"));
        CHECK(r.contains("ndcg"));
        CHECK(r.at("k") == 20);
        CHECK(r.contains("loss"));
    }
    CHECK(json_lines(slurp(tmp.file("metrics.jsonl"))).size() == recs.size());

    const auto mf = read_model(tmp.file("model.bin"));
    CHECK(mf.n_u == 40);
    CHECK(mf.n_i > 0);
    CHECK(mf.e0.rows == mf.n_u + mf.n_i);
    CHECK(mf.e0.cols == 8);
    CHECK(mf.normalize == 0);  // bpr default leaves rows unnormalized

    const auto meta = json::parse(slurp(tmp.file("meta.json")));
    CHECK(meta.at("status") == "complete");
    CHECK(meta.at("config").at("loss") == "bpr");
    CHECK(meta.at("timings_ms").contains("train"));

    // same flags, same seed: byte-identical model
    REQUIRE(run_cli({"train", "--task", "rec", "--loss", "bpr", "--data", data,
                     "--seed", "2", "--epochs", "6", "--eval-every", "3", "--dim", "8",
                     "--batch", "128", "--out", tmp.file("model2.bin"), "--metrics",
                     tmp.file("metrics2.jsonl"), "--metadata",
                     tmp.file("meta2.json")}) == 0);
    CHECK(fnv1a64_file(tmp.file("model.bin")) == fnv1a64_file(tmp.file("model2.bin")));
}

TEST_CASE("cli eval reproduces the training metrics for the saved model") {
    TempDir tmp;
    const auto data = make_interactions(tmp);
    std::string train_out;
    REQUIRE(run_cli({"train", "--task", "rec", "--loss", "gr-coles", "--data", data,
                     "--seed", "5", "--epochs", "8", "--eval-every", "4", "--dim", "8",
                     "--batch", "128", "--out", tmp.file("model.bin"), "--metrics",
                     tmp.file("metrics.jsonl"), "--metadata", tmp.file("meta.json")},
                    &train_out) == 0);
    double best_recall = -1.0;
    for (const auto& r : json_lines(train_out))
        best_recall = std::max(best_recall, r.at("recall").get<double>());

    std::string out;
    REQUIRE(run_cli({"eval", "--model", tmp.file("model.bin"), "--data", data,
                     "--split-seed", "5", "--k", "20", "--metadata",
                     tmp.file("emeta.json")},
                    &out) == 0);
    const auto recs = json_lines(out);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].at("recall").get<double>() == doctest::Approx(best_recall).epsilon(1e-12));
    CHECK(recs[0].at("users").get<std::int64_t>() >= 1);
    CHECK(recs[0].at("k") == 20);
}

TEST_CASE("cli eval rejects mismatched data and leaves metadata unfinished") {
    TempDir tmp;
    const auto data = make_interactions(tmp, 3);
    REQUIRE(run_cli({"train", "--task", "rec", "--loss", "bpr", "--data", data,
                     "--seed", "2", "--epochs", "2", "--eval-every", "10", "--dim", "4",
                     "--out", tmp.file("model.bin"), "--metrics", tmp.file("m.jsonl"),
                     "--metadata", tmp.file("meta.json")}) == 0);

    // different generator seed: different id maps
    const auto g2 = gen_planted_bipartite(41, 60, 2, 0.35, 0.02, 9);
    save_interactions(tmp.file("other.tsv"), g2);
    std::string err;
    CHECK(run_cli({"eval", "--model", tmp.file("model.bin"), "--data",
                   tmp.file("other.tsv"), "--metadata", tmp.file("emeta.json")},
                  nullptr, &err) == 2);
    CHECK(err.find("id maps") != std::string::npos);

    // failure happened after the metadata checkpoint, so the file says "running"
    const auto meta = json::parse(slurp(tmp.file("emeta.json")));
    CHECK(meta.at("status") == "running");
    CHECK(!meta.contains("timings_ms"));
}

TEST_CASE("cli eval refuses node-embedding models") {
    TempDir tmp;
    const auto g = gen_csbm({.n = 50, .d = 2, .mu = {0.3, 0.3}, .nu = {-0.3, -0.3},
                             .p = 0.25, .q = 0.05, .seed = 11});
    save_node_dataset(tmp.file("nodes"), g);
    REQUIRE(run_cli({"train", "--task", "node-cls", "--data", tmp.file("nodes"),
                     "--seed", "1", "--epochs", "2", "--dim", "8", "--out",
                     tmp.file("nm.bin"), "--metrics", tmp.file("nm.jsonl"),
                     "--metadata", tmp.file("nmeta.json")}) == 0);
    const auto data = make_interactions(tmp);
    std::string err;
    CHECK(run_cli({"eval", "--model", tmp.file("nm.bin"), "--data", data, "--metadata",
                   tmp.file("e.json")},
                  nullptr, &err) == 2);
    CHECK(err.find("node-embedding") != std::string::npos);
}

TEST_CASE("cli train node-cls applies task defaults for untouched flags") {
    TempDir tmp;
    const auto g = gen_csbm({.n = 40, .d = 2, .mu = {0.3, 0.3}, .nu = {-0.3, -0.3},
                             .p = 0.3, .q = 0.05, .seed = 4});
    save_node_dataset(tmp.file("nodes"), g);
    std::string out;
    REQUIRE(run_cli({"train", "--task", "node-cls", "--data", tmp.file("nodes"),
                     "--seed", "1", "--epochs", "2", "--out", tmp.file("nm.bin"),
                     "--metrics", tmp.file("nm.jsonl"), "--metadata",
                     tmp.file("nmeta.json")},
                    &out) == 0);
    const auto meta = json::parse(slurp(tmp.file("nmeta.json")));
    CHECK(meta.at("config").at("loss") == "coles");
    CHECK(meta.at("config").at("dim") == 512);
    CHECK(meta.at("config").at("layers") == 2);

    const auto recs = json_lines(out);
    REQUIRE(recs.size() == 1);  // node task reports the final epoch only
    CHECK(recs[0].at("epoch") == 2);
    CHECK(recs[0].contains("loss"));

    const auto mf = read_model(tmp.file("nm.bin"));
    CHECK(mf.n_u == 40);
    CHECK(mf.n_i == 0);
    CHECK(mf.e0.cols == 512);
}

TEST_CASE("cli audit-bounds writes per-batch reports and ratio artifacts") {
    TempDir tmp;
    const auto data = make_interactions(tmp);
    std::string out, err;
    const int code = run_cli({"audit-bounds", "--data", data, "--num-batches", "5",
                              "--batch", "32", "--seed", "9", "--bins", "10",
                              "--out-dir", tmp.file("audit"), "--metadata",
                              tmp.file("ameta.json")},
                             &out, &err);
    REQUIRE(code == 0);
    const auto recs = json_lines(out);
    REQUIRE(recs.size() == 5);
    for (const auto& r : recs) {
        CHECK(r.at("sandwich_ok").get<bool>());
        CHECK(r.at("eq20_ok").get<bool>());
        CHECK(r.at("eq21_ok").get<bool>());
        CHECK(std::abs(r.at("eq19_residual").get<double>()) < 1e-9);
        CHECK(r.at("lower").get<double>() <= r.at("bpr").get<double>());
        CHECK(r.at("bpr").get<double>() <= r.at("upper").get<double>());
    }

    const auto ratios = slurp(tmp.file("audit/ratios.csv"));
    CHECK(ratios.rfind("batch_index,ratio\n", 0) == 0);
    CHECK(std::count(ratios.begin(), ratios.end(), '\n') == 6);

    const auto hist = slurp(tmp.file("audit/histogram.csv"));
    REQUIRE(hist.rfind("bin_left,bin_right,count\n", 0) == 0);
    std::int64_t total = 0;
    std::istringstream in(hist);
    std::string line;
    std::getline(in, line);
    int bins = 0;
    while (std::getline(in, line)) {
        ++bins;
        total += std::stoll(line.substr(line.rfind(',') + 1));
    }
    CHECK(bins == 10);
    CHECK(total == 5);
}

TEST_CASE("cli audit-bounds refuses unnormalized model embeddings") {
    TempDir tmp;
    const auto data = make_interactions(tmp);
    REQUIRE(run_cli({"train", "--task", "rec", "--loss", "bpr", "--data", data,
                     "--seed", "2", "--epochs", "2", "--eval-every", "10", "--dim", "4",
                     "--out", tmp.file("model.bin"), "--metrics", tmp.file("m.jsonl"),
                     "--metadata", tmp.file("meta.json")}) == 0);
    std::string err;
    CHECK(run_cli({"audit-bounds", "--data", data, "--model", tmp.file("model.bin"),
                   "--num-batches", "2", "--batch", "16", "--seed", "1", "--out-dir",
                   tmp.file("audit"), "--metadata", tmp.file("am.json")},
                  nullptr, &err) == 2);
    CHECK(err.find("unnormalized") != std::string::npos);
}

TEST_CASE("cli grad-check reports the max relative error as json") {
    TempDir tmp;
    std::string out;
    const int code = run_cli({"grad-check", "--loss", "gr-coles", "--n", "20", "--dim",
                              "6", "--seed", "3", "--metadata", tmp.file("g.json")},
                             &out);
    REQUIRE(code == 0);
    const auto recs = json_lines(out);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].at("pass").get<bool>());
    CHECK(recs[0].at("max_rel_err").get<double>() <= 1e-4);
    CHECK(recs[0].at("tolerance").get<double>() == 1e-4);
    CHECK(recs[0].at("loss") == "gr-coles");
}

TEST_CASE("cli influence matches closed forms on a tree") {
    TempDir tmp;
    write_file(tmp.file("tree.tsv"), "0\t1\n0\t2\n0\t3\n3\t4\n");
    std::string out;
    REQUIRE(run_cli({"influence", "--graph", tmp.file("tree.tsv"), "--node", "0",
                     "--layers", "2", "--variant", "both", "--metadata",
                     tmp.file("i.json")},
                    &out) == 0);
    const auto recs = json_lines(out);
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) {
        CHECK(r.at("node") == 0);
        CHECK(r.at("degree") == 3);
        REQUIRE(r.at("closed_form").is_number());
        CHECK(r.at("exact").get<double>() ==
              doctest::Approx(r.at("closed_form").get<double>()).epsilon(1e-12));
    }

    // deeper propagation has no closed form
    std::string deep;
    REQUIRE(run_cli({"influence", "--graph", tmp.file("tree.tsv"), "--node", "0",
                     "--layers", "3", "--metadata", tmp.file("i3.json")},
                    &deep) == 0);
    for (const auto& r : json_lines(deep)) CHECK(r.at("closed_form").is_null());

    // node index out of range is a usage error
    CHECK(run_cli({"influence", "--graph", tmp.file("tree.tsv"), "--node", "99",
                   "--metadata", tmp.file("i9.json")}) == 1);
}

TEST_CASE("cli config files fill in flags without overriding explicit ones") {
    TempDir tmp;
    const auto data = make_interactions(tmp);
    write_file(tmp.file("run.cfg"), "epochs=2\ndim=4\nseed=2\n# comment\n\neval-every=10\n");
    REQUIRE(run_cli({"train", "--task", "rec", "--data", data, "--config",
                     tmp.file("run.cfg"), "--epochs", "3", "--out", tmp.file("m.bin"),
                     "--metrics", tmp.file("m.jsonl"), "--metadata",
                     tmp.file("meta.json")}) == 0);
    const auto meta = json::parse(slurp(tmp.file("meta.json")));
    CHECK(meta.at("config").at("epochs") == 3);  // flag wins
    CHECK(meta.at("config").at("dim") == 4);     // config fills the rest
    CHECK(meta.at("config").at("seed") == 2);

    std::string err;
    CHECK(run_cli({"train", "--task", "rec", "--data", data, "--seed", "1", "--config",
                   tmp.file("absent.cfg"), "--metadata", tmp.file("x.json")},
                  nullptr, &err) == 1);
    CHECK(err.find("config") != std::string::npos);

    write_file(tmp.file("bad.cfg"), "telepathy=9\n");
    CHECK(run_cli({"train", "--task", "rec", "--data", data, "--seed", "1", "--config",
                   tmp.file("bad.cfg"), "--metadata", tmp.file("y.json")}) == 1);
}

TEST_CASE("cli threads default comes from the environment") {
    TempDir tmp;
    const auto data = make_interactions(tmp);
    REQUIRE(run_cli({"train", "--task", "rec", "--data", data, "--seed", "2",
                     "--epochs", "2", "--eval-every", "10", "--dim", "4", "--out",
                     tmp.file("m.bin"), "--metrics", tmp.file("m.jsonl"), "--metadata",
                     tmp.file("meta.json")}) == 0);

    setenv("GRCL_THREADS", "3", 1);
    std::string out;
    const int code = run_cli({"eval", "--model", tmp.file("m.bin"), "--data", data,
                              "--split-seed", "2", "--metadata", tmp.file("e.json")},
                             &out);
    unsetenv("GRCL_THREADS");
    REQUIRE(code == 0);
    const auto meta = json::parse(slurp(tmp.file("e.json")));
    CHECK(meta.at("config").at("threads") == 3);

    // flag beats the environment
    setenv("GRCL_THREADS", "3", 1);
    const int code2 = run_cli({"eval", "--model", tmp.file("m.bin"), "--data", data,
                               "--split-seed", "2", "--threads", "2", "--metadata",
                               tmp.file("e2.json")});
    unsetenv("GRCL_THREADS");
    REQUIRE(code2 == 0);
    CHECK(json::parse(slurp(tmp.file("e2.json"))).at("config").at("threads") == 2);
}
