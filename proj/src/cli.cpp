#include "grcl/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "grcl/bounds.hpp"
#include "grcl/data.hpp"
#include "grcl/encoder.hpp"
#include "grcl/graph.hpp"
#include "grcl/losses.hpp"
#include "grcl/matrix.hpp"
#include "grcl/metrics.hpp"
#include "grcl/rng.hpp"
#include "grcl/training.hpp"

namespace grcl::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";
constexpr double kGradTolerance = 1e-4;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

const char* variant_flag_name(Variant v) {
    return v == Variant::layer_average ? "layer-average" : "selfloop-last";
}

int default_threads() {
    if (const char* env = std::getenv("GRCL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
        std::fprintf(stderr, "warning: ignoring invalid GRCL_THREADS value '%s'\n", env);
    }
    return 1;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

/// Expands `--config FILE` into `--key=value` tokens injected right after the
/// subcommand name, so CLI11 validates them like ordinary flags. A key is
/// skipped when the same flag already appears on the command line; within the
/// file the last occurrence of a key wins.
std::vector<std::string> expand_config(std::vector<std::string> tokens) {
    std::size_t sub = tokens.size();
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!tokens[i].empty() && tokens[i][0] != '-') {
            sub = i;
            break;
        }
    }
    if (sub == tokens.size()) return tokens;

    std::string path;
    for (std::size_t i = sub + 1; i < tokens.size(); ++i) {
        if (tokens[i] == "--config" && i + 1 < tokens.size())
            path = tokens[i + 1];
        else if (tokens[i].rfind("--config=", 0) == 0)
            path = tokens[i].substr(9);
    }
    if (path.empty()) return tokens;

    std::vector<std::string> given;
    for (std::size_t i = sub + 1; i < tokens.size(); ++i) {
        if (tokens[i].rfind("--", 0) != 0) continue;
        given.push_back(tokens[i].substr(2, tokens[i].find('=') - 2));
    }

    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config file " + path + " line " +
                                        std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.rfind("--", 0) == 0) key = key.substr(2);
        for (auto& c : key)
            if (c == '_') c = '-';
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
            value.back() == value.front())
            value = value.substr(1, value.size() - 2);
        if (key == "config")
            throw std::invalid_argument("config file " + path + " line " +
                                        std::to_string(lineno) + ": cannot nest config files");
        std::erase_if(kv, [&](const auto& p) { return p.first == key; });
        kv.emplace_back(std::move(key), std::move(value));
    }

    std::vector<std::string> inject;
    for (const auto& [key, value] : kv) {
        if (std::find(given.begin(), given.end(), key) != given.end()) continue;
        inject.push_back("--" + key + "=" + value);
    }
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(sub) + 1, inject.begin(),
                  inject.end());
    return tokens;
}

/// Run record written to disk before any result output and finalized with
/// phase timings afterward; identical inputs hash identically.
class RunMeta {
  public:
    explicit RunMeta(std::string path) : path_(std::move(path)) {}

    void add_input(const std::string& file) { j_["inputs"][file] = hex64(fnv1a64_file(file)); }
    void add_output(const std::string& file) { j_["outputs"][file] = hex64(fnv1a64_file(file)); }

    void start(const std::string& command, json config) {
        j_["command"] = command;
        j_["config"] = std::move(config);
        j_["version"] = kVersion;
        j_["status"] = "running";
        t0_ = std::chrono::steady_clock::now();
        flush();
    }

    template <class F>
    void phase(const std::string& name, F&& body) {
        const auto a = std::chrono::steady_clock::now();
        body();
        const auto b = std::chrono::steady_clock::now();
        timings_[name] = std::chrono::duration<double, std::milli>(b - a).count();
    }

    void finish() {
        timings_["total"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
                .count();
        j_["timings_ms"] = timings_;
        j_["status"] = "complete";
        flush();
    }

  private:
    void flush() const {
        std::ofstream out(path_, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write run metadata to " + path_);
        out << j_.dump(2) << "\n";
    }

    json j_ = json::object();
    std::string path_;
    std::map<std::string, double> timings_;
    std::chrono::steady_clock::time_point t0_;
};

void append_jsonl(const std::string& path, const std::vector<json>& records) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + path);
    for (const auto& r : records) out << r.dump() << "\n";
}

TrainedModel model_from_file(const ModelFile& mf) {
    TrainedModel m;
    m.table.e0 = mf.e0;
    m.table.adam_m = Matrix(mf.e0.rows, mf.e0.cols, 0.0);
    m.table.adam_v = Matrix(mf.e0.rows, mf.e0.cols, 0.0);
    m.n_u = mf.n_u;
    m.layers = mf.layers;
    m.variant = mf.variant == 1 ? Variant::selfloop_last : Variant::layer_average;
    m.normalized = mf.normalize != 0;
    return m;
}

// ---------------------------------------------------------------- train ---

struct TrainOpts {
    std::string task = "rec";
    std::string loss = "bpr";
    std::string data;
    std::int64_t dim = 64;
    std::int64_t layers = 3;
    std::int64_t epochs = 50;
    std::int64_t batch = 2048;
    int neg_k = 1;
    double lr = 1e-2;
    double beta = 0.9;
    double t = 2.0;
    double lambda = 1e-4;
    std::uint64_t seed = 0;
    std::string variant = "layer-average";
    std::string normalize = "auto";
    std::string out = "model.bin";
    double split_ratio = 0.8;
    std::int64_t eval_every = 10;
    std::int64_t patience = 10;
    std::int64_t eval_k = 20;
    double coles_scale = 1.0;
    double reg_scale = 1.0;
    int threads = 1;
    std::string metrics = "metrics.jsonl";
    std::string metadata = "run_metadata.json";
    std::string config;
    bool loss_given = false;
    bool dim_given = false;
    bool layers_given = false;
};

json train_config_json(const TrainOpts& o) {
    return json{{"task", o.task},           {"loss", o.loss},
                {"data", o.data},           {"dim", o.dim},
                {"layers", o.layers},       {"epochs", o.epochs},
                {"batch", o.batch},         {"neg_k", o.neg_k},
                {"lr", o.lr},               {"beta", o.beta},
                {"t", o.t},                 {"lambda", o.lambda},
                {"seed", o.seed},           {"variant", o.variant},
                {"normalize", o.normalize}, {"out", o.out},
                {"split_ratio", o.split_ratio}, {"eval_every", o.eval_every},
                {"patience", o.patience},   {"eval_k", o.eval_k},
                {"coles_scale", o.coles_scale}, {"reg_scale", o.reg_scale},
                {"threads", o.threads},     {"metrics", o.metrics},
                {"batch_construction", "edge-centric"},
                {"init", "gaussian sd 0.1"}};
}

TrainConfig to_train_config(const TrainOpts& o) {
    TrainConfig cfg;
    cfg.loss = loss_from_string(o.loss);
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.K = o.neg_k;
    cfg.lr = o.lr;
    cfg.beta = o.beta;
    cfg.t = o.t;
    cfg.lambda = o.lambda;
    cfg.layers = o.layers;
    cfg.dim = o.dim;
    cfg.seed = o.seed;
    cfg.eval_every = o.eval_every;
    cfg.patience = o.patience;
    cfg.eval_k = o.eval_k;
    cfg.variant = variant_from_string(o.variant);
    cfg.normalize = normalize_from_string(o.normalize);
    cfg.coles_scale = o.coles_scale;
    cfg.reg_scale = o.reg_scale;
    cfg.threads = o.threads;
    cfg.validate();
    return cfg;
}

int run_train(TrainOpts o) {
    if (o.task == "node-cls") {
        // task-appropriate defaults for flags the user left untouched
        if (!o.loss_given) o.loss = "coles";
        if (!o.dim_given) o.dim = 512;
        if (!o.layers_given) o.layers = 2;
    }
    const auto cfg = to_train_config(o);

    RunMeta meta(o.metadata);
    meta.add_input(o.data);
    meta.start("train", train_config_json(o));

    std::vector<json> records;
    ModelFile mf;
    mf.layers = cfg.layers;
    mf.variant = cfg.variant == Variant::selfloop_last ? 1 : 0;

    if (o.task == "rec") {
        InteractionGraph g;
        meta.phase("load", [&] { g = load_interactions(o.data, o.split_ratio, o.seed); });
        TrainedModel model;
        meta.phase("train", [&] { model = train_gr(g, cfg); });

        mf.n_u = g.n_u;
        mf.n_i = g.n_i;
        mf.normalize = model.normalized ? 1 : 0;
        mf.e0 = std::move(model.table.e0);
        mf.user_ids = g.user_ids;
        mf.item_ids = g.item_ids;
        meta.phase("save", [&] { write_model(o.out, mf); });
        meta.add_output(o.out);

        for (const auto& ev : model.history.evals) {
            json r{{"epoch", ev.epoch},
                   {"recall", ev.recall},
                   {"ndcg", ev.ndcg},
                   {"k", cfg.eval_k},
                   {"loss", model.history.epochs[static_cast<std::size_t>(ev.epoch - 1)].loss}};
            records.push_back(std::move(r));
        }
        std::fprintf(stderr, "trained %zu epoch(s)%s; best recall@%lld %.6f at epoch %lld\n",
                     model.history.epochs.size(),
                     model.history.early_stopped ? " (early stop)" : "",
                     static_cast<long long>(cfg.eval_k), model.history.best_recall,
                     static_cast<long long>(model.history.best_epoch));
    } else {
        PlainGraph g;
        meta.phase("load", [&] { g = load_node_dataset(o.data); });
        TrainedModel model;
        meta.phase("train", [&] { model = train_gcl(g, cfg); });

        mf.n_u = g.n;
        mf.n_i = 0;
        mf.normalize = model.normalized ? 1 : 0;
        mf.e0 = std::move(model.table.e0);
        mf.user_ids = g.node_ids;
        meta.phase("save", [&] { write_model(o.out, mf); });
        meta.add_output(o.out);

        if (!model.history.epochs.empty()) {
            const auto& last = model.history.epochs.back();
            records.push_back(json{{"epoch", last.epoch}, {"loss", last.loss}});
        }
        std::fprintf(stderr, "pre-trained %zu epoch(s); embeddings frozen in %s\n",
                     model.history.epochs.size(), o.out.c_str());
    }

    for (const auto& r : records) std::cout << r.dump() << "\n";
    append_jsonl(o.metrics, records);
    meta.finish();
    return 0;
}

// ----------------------------------------------------------------- eval ---

struct EvalOpts {
    std::string model;
    std::string data;
    std::int64_t k = 20;
    double split_ratio = 0.8;
    std::uint64_t split_seed = 0;
    int threads = 1;
    std::string metadata = "run_metadata.json";
    std::string config;
};

int run_eval(const EvalOpts& o) {
    RunMeta meta(o.metadata);
    meta.add_input(o.model);
    meta.add_input(o.data);
    meta.start("eval", json{{"model", o.model},
                            {"data", o.data},
                            {"k", o.k},
                            {"split_ratio", o.split_ratio},
                            {"split_seed", o.split_seed},
                            {"threads", o.threads}});

    ModelFile mf;
    InteractionGraph g;
    meta.phase("load", [&] {
        mf = read_model(o.model);
        g = load_interactions(o.data, o.split_ratio, o.split_seed);
    });
    if (mf.n_i == 0)
        throw std::runtime_error("eval: node-embedding model; ranking evaluation needs items");
    if (mf.user_ids != g.user_ids || mf.item_ids != g.item_ids)
        throw std::runtime_error(
            "eval: model id maps do not match the data (different file or split settings?)");

    RankingResult res;
    meta.phase("rank", [&] {
        const auto model = model_from_file(mf);
        const auto op = build_propagation_operator(g, model.variant);
        const auto e = encode(model, op, o.threads);
        res = evaluate_ranking(e, g, o.k, o.threads);
    });

    std::cout << json{{"recall", res.mean_recall},
                      {"ndcg", res.mean_ndcg},
                      {"k", res.k},
                      {"users", res.num_users}}
                     .dump()
              << "\n";
    meta.finish();
    return 0;
}

// --------------------------------------------------------- audit-bounds ---

struct AuditOpts {
    std::string data;
    std::string model;
    std::int64_t dim = 64;
    std::int64_t num_batches = 1000;
    std::int64_t batch = 2048;
    int neg_k = 1;
    std::uint64_t seed = 0;
    int bins = 50;
    std::string out_dir = ".";
    int threads = 1;
    std::string metadata = "run_metadata.json";
    std::string config;
};

void write_ratio_files(const std::string& dir, const std::vector<double>& ratios, int bins) {
    fs::create_directories(dir);
    const auto ratios_path = (fs::path(dir) / "ratios.csv").string();
    {
        std::ofstream out(ratios_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + ratios_path);
        out << "batch_index,ratio\n";
        char buf[40];
        for (std::size_t i = 0; i < ratios.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", ratios[i]);
            out << i << "," << buf << "\n";
        }
    }
    double lo = ratios.empty() ? 0.0 : ratios[0];
    double hi = lo;
    for (const double r : ratios) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    const double width = std::max(hi - lo, 1e-12) / bins;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
    for (const double r : ratios) {
        auto b = static_cast<std::int64_t>((r - lo) / width);
        b = std::min<std::int64_t>(std::max<std::int64_t>(b, 0), bins - 1);
        ++counts[static_cast<std::size_t>(b)];
    }
    const auto hist_path = (fs::path(dir) / "histogram.csv").string();
    std::ofstream out(hist_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + hist_path);
    out << "bin_left,bin_right,count\n";
    char lbuf[40], rbuf[40];
    for (int b = 0; b < bins; ++b) {
        std::snprintf(lbuf, sizeof lbuf, "%.17g", lo + b * width);
        std::snprintf(rbuf, sizeof rbuf, "%.17g", lo + (b + 1) * width);
        out << lbuf << "," << rbuf << "," << counts[static_cast<std::size_t>(b)] << "\n";
    }
}

json report_json(const BoundReport& r, std::int64_t index) {
    return json{{"batch_index", index},
                {"bpr", r.bpr},
                {"bpr_pos", r.bpr_pos},
                {"bpr_neg", r.bpr_neg},
                {"coles_pos", r.coles_pos},
                {"coles_neg", r.coles_neg},
                {"lower", r.lower},
                {"upper", r.upper},
                {"beta_l", r.beta_l},
                {"beta_u", r.beta_u},
                {"ratio", r.ratio},
                {"d_min", r.d_min},
                {"d_max", r.d_max},
                {"K", r.K},
                {"n_u_batch", r.n_u_batch},
                {"m_batch", r.m_batch},
                {"eq19_residual", r.eq19_residual},
                {"eq20_ok", r.eq20_ok},
                {"eq21_ok", r.eq21_ok},
                {"sandwich_ok", r.sandwich_ok}};
}

int run_audit(const AuditOpts& o) {
    if (o.num_batches < 1 || o.batch < 1 || o.bins < 1)
        throw std::invalid_argument("audit-bounds: num-batches, batch, and bins must be >= 1");

    RunMeta meta(o.metadata);
    meta.add_input(o.data);
    if (!o.model.empty()) meta.add_input(o.model);
    meta.start("audit-bounds", json{{"data", o.data},
                                    {"model", o.model},
                                    {"dim", o.dim},
                                    {"num_batches", o.num_batches},
                                    {"batch", o.batch},
                                    {"neg_k", o.neg_k},
                                    {"seed", o.seed},
                                    {"bins", o.bins},
                                    {"out_dir", o.out_dir},
                                    {"threads", o.threads},
                                    {"anchor_degree_scope", "batch-local extrema of full-graph user degrees"}});

    InteractionGraph g;
    meta.phase("load", [&] { g = load_interactions(o.data, 1.0, o.seed); });

    Matrix e;
    meta.phase("embed", [&] {
        if (o.model.empty()) {
            e = Matrix(g.n(), o.dim);
            Rng rng(mix_seed(o.seed, 7));
            for (auto& v : e.data) v = rng.gaussian(0.0, 1.0);
            normalize_rows(e);
        } else {
            const auto mf = read_model(o.model);
            if (mf.normalize == 0)
                throw std::runtime_error(
                    "audit-bounds: model embeddings are unnormalized; the bounds assume unit rows");
            if (mf.user_ids != g.user_ids || mf.item_ids != g.item_ids)
                throw std::runtime_error("audit-bounds: model id maps do not match the data");
            const auto model = model_from_file(mf);
            const auto op = build_propagation_operator(g, model.variant);
            e = encode(model, op, o.threads);
        }
    });

    std::vector<double> ratios;
    ratios.reserve(static_cast<std::size_t>(o.num_batches));
    std::int64_t bad = 0;
    meta.phase("audit", [&] {
        Rng rng(mix_seed(o.seed, 8));
        const std::span<const std::int64_t> anchor_degrees(g.degrees.data(),
                                                           static_cast<std::size_t>(g.n_u));
        for (std::int64_t b = 0; b < o.num_batches; ++b) {
            const auto batch = sample_edge_batch(g, o.batch, o.neg_k, rng);
            const auto rep = audit_batch(e, batch, anchor_degrees);
            std::cout << report_json(rep, b).dump() << "\n";
            ratios.push_back(rep.ratio);
            if (!rep.sandwich_ok || !rep.eq20_ok || !rep.eq21_ok) ++bad;
        }
    });
    meta.phase("write", [&] { write_ratio_files(o.out_dir, ratios, o.bins); });
    meta.add_output((fs::path(o.out_dir) / "ratios.csv").string());
    meta.add_output((fs::path(o.out_dir) / "histogram.csv").string());

    std::fprintf(stderr, "audited %lld batch(es); %lld with a failed check\n",
                 static_cast<long long>(o.num_batches), static_cast<long long>(bad));
    meta.finish();
    return 0;
}

// ----------------------------------------------------------- grad-check ---

struct GradOpts {
    std::string loss = "gr-coles";
    std::int64_t n = 30;
    std::int64_t dim = 8;
    std::uint64_t seed = 0;
    std::string metadata = "run_metadata.json";
    std::string config;
};

int run_grad_check(const GradOpts& o) {
    RunMeta meta(o.metadata);
    meta.start("grad-check",
               json{{"loss", o.loss}, {"n", o.n}, {"dim", o.dim}, {"seed", o.seed}});
    double err = 0.0;
    meta.phase("check", [&] { err = pipeline_fd_error(loss_from_string(o.loss), o.n, o.dim, o.seed); });
    const bool pass = err <= kGradTolerance;
    std::cout << json{{"loss", o.loss},
                      {"n", o.n},
                      {"dim", o.dim},
                      {"seed", o.seed},
                      {"max_rel_err", err},
                      {"tolerance", kGradTolerance},
                      {"pass", pass}}
                     .dump()
              << "\n";
    std::fprintf(stderr, "max relative gradient error %.3e (%s)\n", err,
                 pass ? "pass" : "FAIL");
    meta.finish();
    return pass ? 0 : 2;
}

// ------------------------------------------------------------ influence ---

struct InfluenceOpts {
    std::string graph;
    std::int64_t node = 0;
    std::int64_t layers = 2;
    std::string variant = "both";
    std::string metadata = "run_metadata.json";
    std::string config;
};

int run_influence(const InfluenceOpts& o) {
    if (o.layers < 1) throw std::invalid_argument("influence: --layers must be >= 1");
    RunMeta meta(o.metadata);
    meta.add_input(o.graph);
    meta.start("influence", json{{"graph", o.graph},
                                 {"node", o.node},
                                 {"layers", o.layers},
                                 {"variant", o.variant}});

    PlainGraph g;
    meta.phase("load", [&] { g = load_edge_list(o.graph); });
    if (o.node < 0 || o.node >= g.n)
        throw std::invalid_argument("influence: node " + std::to_string(o.node) +
                                    " out of range [0, " + std::to_string(g.n) + ")");

    std::vector<Variant> variants;
    if (o.variant == "both")
        variants = {Variant::layer_average, Variant::selfloop_last};
    else
        variants = {variant_from_string(o.variant)};

    meta.phase("analyze", [&] {
        const auto a = build_adjacency(g);
        const auto d = g.degree(o.node);
        const auto d2 = two_hop_count(a, o.node);
        for (const auto v : variants) {
            const double exact = relative_influence(g, o.node, v, static_cast<int>(o.layers));
            json r{{"node", o.node},
                   {"variant", variant_flag_name(v)},
                   {"layers", o.layers},
                   {"exact", exact},
                   {"degree", d},
                   {"two_hop", d2}};
            if (o.layers == 2) {
                const double cf = influence_closed_form(v, d, d2);
                r["closed_form"] = cf;
                r["deviation"] = exact - cf;
            } else {
                r["closed_form"] = nullptr;
            }
            std::cout << r.dump() << "\n";
        }
    });
    meta.finish();
    return 0;
}

// ------------------------------------------------------------ gen-synth ---

struct GenOpts {
    std::string kind;
    std::uint64_t seed = 0;
    std::string out;
    // csbm
    std::int64_t n = 200;
    std::int64_t feat_dim = 8;
    double mu = 0.0;
    double nu = 0.0;
    double p = -1.0;
    double q = -1.0;
    // planted bipartite
    std::int64_t users = 200;
    std::int64_t items = 300;
    std::int64_t blocks = 4;
    double p_in = 0.2;
    double p_out = 0.01;
    std::string metadata = "run_metadata.json";
    std::string config;
};

int run_gen_synth(const GenOpts& o) {
    RunMeta meta(o.metadata);
    json cfg{{"kind", o.kind}, {"seed", o.seed}, {"out", o.out}};
    if (o.kind == "csbm") {
        if (o.p < 0.0 || o.q < 0.0)
            throw std::invalid_argument("gen-synth: csbm requires --p and --q");
        cfg["n"] = o.n;
        cfg["feat_dim"] = o.feat_dim;
        cfg["mu"] = o.mu;
        cfg["nu"] = o.nu;
        cfg["p"] = o.p;
        cfg["q"] = o.q;
    } else {
        cfg["users"] = o.users;
        cfg["items"] = o.items;
        cfg["blocks"] = o.blocks;
        cfg["p_in"] = o.p_in;
        cfg["p_out"] = o.p_out;
    }
    meta.start("gen-synth", cfg);

    json summary{{"kind", o.kind}, {"out", o.out}};
    if (o.kind == "csbm") {
        CsbmParams params;
        params.n = o.n;
        params.d = o.feat_dim;
        params.mu.assign(static_cast<std::size_t>(o.feat_dim), o.mu);
        params.nu.assign(static_cast<std::size_t>(o.feat_dim), o.nu);
        params.p = o.p;
        params.q = o.q;
        params.seed = o.seed;
        PlainGraph g;
        meta.phase("generate", [&] { g = gen_csbm(params); });
        meta.phase("write", [&] { save_node_dataset(o.out, g, cfg.dump(2)); });
        meta.add_output((fs::path(o.out) / "edges.tsv").string());
        summary["nodes"] = g.n;
        summary["edges"] = static_cast<std::int64_t>(g.edges.size());
    } else {
        InteractionGraph g;
        meta.phase("generate", [&] {
            g = gen_planted_bipartite(o.users, o.items, o.blocks, o.p_in, o.p_out, o.seed);
        });
        meta.phase("write", [&] { save_interactions(o.out, g, cfg.dump(2)); });
        meta.add_output(o.out);
        summary["users"] = g.n_u;
        summary["items"] = g.n_i;
        summary["edges"] = g.m;
    }

    std::cout << summary.dump() << "\n";
    meta.finish();
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Graph-embedding toolkit: training, ranking evaluation, loss-bound audits, "
                 "influence analysis, and synthetic data generation"};
    app.require_subcommand(1);
    const int env_threads = default_threads();

    TrainOpts t;
    t.threads = env_threads;
    auto* ct = app.add_subcommand("train", "Train embeddings on interactions or a node graph");
    ct->add_option("--config", t.config, "flat key=value file; command-line flags override");
    ct->add_option("--task", t.task)->check(CLI::IsMember({"rec", "node-cls"}));
    auto* t_loss = ct->add_option("--loss", t.loss)
                       ->check(CLI::IsMember({"bpr", "coles", "gr-coles"}));
    ct->add_option("--data", t.data, "interaction file (rec) or dataset dir (node-cls)")
        ->required();
    auto* t_dim = ct->add_option("--dim", t.dim);
    auto* t_layers = ct->add_option("--layers", t.layers);
    ct->add_option("--epochs", t.epochs);
    ct->add_option("--batch", t.batch);
    ct->add_option("--neg-k", t.neg_k);
    ct->add_option("--lr", t.lr);
    ct->add_option("--beta", t.beta);
    ct->add_option("--t", t.t);
    ct->add_option("--lambda", t.lambda);
    ct->add_option("--seed", t.seed)->required();
    ct->add_option("--variant", t.variant)
        ->check(CLI::IsMember({"layer-average", "selfloop-last"}));
    ct->add_option("--normalize", t.normalize)->check(CLI::IsMember({"on", "off", "auto"}));
    ct->add_option("--out", t.out);
    ct->add_option("--split-ratio", t.split_ratio);
    ct->add_option("--eval-every", t.eval_every);
    ct->add_option("--patience", t.patience);
    ct->add_option("--eval-k", t.eval_k);
    ct->add_option("--coles-scale", t.coles_scale);
    ct->add_option("--reg-scale", t.reg_scale);
    ct->add_option("--threads", t.threads);
    ct->add_option("--metrics", t.metrics);
    ct->add_option("--metadata", t.metadata);

    EvalOpts ev;
    ev.threads = env_threads;
    auto* ce = app.add_subcommand("eval", "Rank the full catalog with a trained model");
    ce->add_option("--config", ev.config, "flat key=value file; command-line flags override");
    ce->add_option("--model", ev.model)->required();
    ce->add_option("--data", ev.data)->required();
    ce->add_option("--k", ev.k);
    ce->add_option("--split-ratio", ev.split_ratio);
    ce->add_option("--split-seed", ev.split_seed, "seed the training run used for its split");
    ce->add_option("--threads", ev.threads);
    ce->add_option("--metadata", ev.metadata);

    AuditOpts a;
    a.threads = env_threads;
    auto* ca = app.add_subcommand("audit-bounds",
                                  "Audit the ranking-loss sandwich on random batches");
    ca->add_option("--config", a.config, "flat key=value file; command-line flags override");
    ca->add_option("--data", a.data)->required();
    ca->add_option("--model", a.model, "optional trained model; random unit rows otherwise");
    ca->add_option("--dim", a.dim);
    ca->add_option("--num-batches", a.num_batches);
    ca->add_option("--batch", a.batch);
    ca->add_option("--neg-k", a.neg_k);
    ca->add_option("--seed", a.seed)->required();
    ca->add_option("--bins", a.bins);
    ca->add_option("--out-dir", a.out_dir);
    ca->add_option("--threads", a.threads);
    ca->add_option("--metadata", a.metadata);

    GradOpts gc;
    auto* cg = app.add_subcommand("grad-check",
                                  "Compare analytic and finite-difference gradients");
    cg->add_option("--config", gc.config, "flat key=value file; command-line flags override");
    cg->add_option("--loss", gc.loss)->check(CLI::IsMember({"bpr", "coles", "gr-coles"}));
    cg->add_option("--n", gc.n);
    cg->add_option("--dim", gc.dim);
    cg->add_option("--seed", gc.seed)->required();
    cg->add_option("--metadata", gc.metadata);

    InfluenceOpts inf;
    auto* ci = app.add_subcommand("influence",
                                  "Self-influence of a node under both encoder variants");
    ci->add_option("--config", inf.config, "flat key=value file; command-line flags override");
    ci->add_option("--graph", inf.graph)->required();
    ci->add_option("--node", inf.node)->required();
    ci->add_option("--layers", inf.layers);
    ci->add_option("--variant", inf.variant)
        ->check(CLI::IsMember({"layer-average", "selfloop-last", "both"}));
    ci->add_option("--metadata", inf.metadata);

    GenOpts gs;
    auto* cs = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
    cs->add_option("--config", gs.config, "flat key=value file; command-line flags override");
    cs->add_option("--kind", gs.kind)->required()->check(CLI::IsMember({"csbm", "planted"}));
    cs->add_option("--seed", gs.seed)->required();
    cs->add_option("--out", gs.out, "directory (csbm) or file path (planted)")->required();
    cs->add_option("--n", gs.n);
    cs->add_option("--feat-dim", gs.feat_dim);
    cs->add_option("--mu", gs.mu);
    cs->add_option("--nu", gs.nu);
    cs->add_option("--p", gs.p);
    cs->add_option("--q", gs.q);
    cs->add_option("--users", gs.users);
    cs->add_option("--items", gs.items);
    cs->add_option("--blocks", gs.blocks);
    cs->add_option("--p-in", gs.p_in);
    cs->add_option("--p-out", gs.p_out);
    cs->add_option("--metadata", gs.metadata);

    try {
        std::vector<std::string> tokens(argv + std::min(argc, 1), argv + argc);
        tokens = expand_config(std::move(tokens));
        std::reverse(tokens.begin(), tokens.end());
        app.parse(std::move(tokens));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*ct) {
            t.loss_given = t_loss->count() > 0;
            t.dim_given = t_dim->count() > 0;
            t.layers_given = t_layers->count() > 0;
            return run_train(std::move(t));
        }
        if (*ce) return run_eval(ev);
        if (*ca) return run_audit(a);
        if (*cg) return run_grad_check(gc);
        if (*ci) return run_influence(inf);
        if (*cs) return run_gen_synth(gs);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace grcl::cli
