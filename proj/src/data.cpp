#include "grcl/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "grcl/rng.hpp"

namespace fs = std::filesystem;

namespace grcl {

void CsbmParams::validate() const {
    if (n < 1) throw std::invalid_argument("CsbmParams: n must be >= 1");
    if (d < 1) throw std::invalid_argument("CsbmParams: d must be >= 1");
    if (static_cast<std::int64_t>(mu.size()) != d || static_cast<std::int64_t>(nu.size()) != d)
        throw std::invalid_argument("CsbmParams: mu/nu must have length d");
    if (!(q >= 0.0 && q <= p && p <= 1.0))
        throw std::invalid_argument("CsbmParams: need 0 <= q <= p <= 1");
}

namespace {

bool blank_line(const std::string& s) {
    return s.find_first_not_of(" \t") == std::string::npos;
}

void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
}

/// Per-user holdout: shuffle each user's items with a user-tagged stream so
/// the split is independent of user processing order, keep
/// max(1, floor(count * ratio)) in train, drop items that lose every
/// training edge (the normalized operator rejects isolated nodes).
InteractionGraph finish_split(std::int64_t n_u, std::int64_t n_i,
                              std::vector<std::vector<std::int32_t>> items_of_user,
                              std::vector<std::string> user_ids,
                              std::vector<std::string> item_ids, double split_ratio,
                              std::uint64_t seed, LoadReport* report) {
    if (!(split_ratio > 0.0 && split_ratio <= 1.0))
        throw std::invalid_argument("split ratio must be in (0, 1]");

    std::vector<Edge> train;
    std::vector<Edge> test;
    for (std::int64_t u = 0; u < n_u; ++u) {
        auto& items = items_of_user[static_cast<std::size_t>(u)];
        std::int32_t uu = static_cast<std::int32_t>(u);
        if (items.size() < 2) {
            for (std::int32_t i : items) train.push_back({uu, i});
            continue;
        }
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(u)));
        rng.shuffle(items);
        std::int64_t count = static_cast<std::int64_t>(items.size());
        std::int64_t n_train = std::max<std::int64_t>(
            1, static_cast<std::int64_t>(std::floor(static_cast<double>(count) * split_ratio)));
        for (std::int64_t r = 0; r < count; ++r) {
            if (r < n_train)
                train.push_back({uu, items[static_cast<std::size_t>(r)]});
            else
                test.push_back({uu, items[static_cast<std::size_t>(r)]});
        }
    }

    if (report) {
        report->split_train = static_cast<std::int64_t>(train.size());
        report->split_test = static_cast<std::int64_t>(test.size());
    }

    std::vector<std::int64_t> train_deg(static_cast<std::size_t>(n_i), 0);
    for (const Edge& e : train) ++train_deg[static_cast<std::size_t>(e.second)];
    std::int64_t dropped = std::count(train_deg.begin(), train_deg.end(), 0);
    if (dropped > 0) {
        std::cerr << "warning: dropping " << dropped
                  << " item(s) with no training interactions\n";
        std::vector<std::int32_t> remap(static_cast<std::size_t>(n_i), -1);
        std::vector<std::string> kept_ids;
        std::int32_t next = 0;
        for (std::int64_t i = 0; i < n_i; ++i) {
            if (train_deg[static_cast<std::size_t>(i)] == 0) continue;
            remap[static_cast<std::size_t>(i)] = next++;
            if (!item_ids.empty()) kept_ids.push_back(item_ids[static_cast<std::size_t>(i)]);
        }
        for (Edge& e : train) e.second = remap[static_cast<std::size_t>(e.second)];
        std::vector<Edge> kept_test;
        for (const Edge& e : test) {
            std::int32_t to = remap[static_cast<std::size_t>(e.second)];
            if (to >= 0) kept_test.push_back({e.first, to});
        }
        test = std::move(kept_test);
        item_ids = std::move(kept_ids);
        n_i = next;
    }
    if (report) report->dropped_items = dropped;

    return InteractionGraph::build(n_u, n_i, std::move(train), std::move(test),
                                   std::move(user_ids), std::move(item_ids));
}

}  // namespace

InteractionGraph load_interactions(const std::string& path, double split_ratio,
                                   std::uint64_t seed, LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_interactions: cannot open " + path);

    std::unordered_map<std::string, std::int32_t> umap;
    std::unordered_map<std::string, std::int32_t> imap;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::vector<std::vector<std::int32_t>> items_of_user;
    std::vector<std::unordered_set<std::int32_t>> seen_of_user;

    std::string line;
    std::int64_t lineno = 0;
    std::int64_t data_lines = 0;
    std::int64_t duplicates = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (blank_line(line)) continue;
        std::size_t tab1 = line.find('\t');
        if (tab1 == std::string::npos || tab1 == 0)
            throw std::runtime_error("load_interactions: malformed line " +
                                     std::to_string(lineno) + " in " + path);
        std::size_t tab2 = line.find('\t', tab1 + 1);
        std::string uid = line.substr(0, tab1);
        std::string iid = tab2 == std::string::npos ? line.substr(tab1 + 1)
                                                    : line.substr(tab1 + 1, tab2 - tab1 - 1);
        if (iid.empty())
            throw std::runtime_error("load_interactions: malformed line " +
                                     std::to_string(lineno) + " in " + path);
        ++data_lines;

        auto [uit, unew] = umap.try_emplace(uid, static_cast<std::int32_t>(user_ids.size()));
        if (unew) {
            user_ids.push_back(uid);
            items_of_user.emplace_back();
            seen_of_user.emplace_back();
        }
        auto [iit, inew] = imap.try_emplace(iid, static_cast<std::int32_t>(item_ids.size()));
        if (inew) item_ids.push_back(iid);

        std::int32_t u = uit->second;
        std::int32_t i = iit->second;
        if (seen_of_user[static_cast<std::size_t>(u)].insert(i).second)
            items_of_user[static_cast<std::size_t>(u)].push_back(i);
        else
            ++duplicates;
    }
    if (data_lines == 0)
        throw std::runtime_error("load_interactions: empty interaction file: " + path);

    if (report) {
        report->lines = data_lines;
        report->duplicates = duplicates;
    }
    std::int64_t n_u = static_cast<std::int64_t>(user_ids.size());
    std::int64_t n_i = static_cast<std::int64_t>(item_ids.size());
    return finish_split(n_u, n_i, std::move(items_of_user), std::move(user_ids),
                        std::move(item_ids), split_ratio, seed, report);
}

InteractionGraph split_interactions(const InteractionGraph& g, double split_ratio,
                                    std::uint64_t seed, LoadReport* report) {
    std::vector<std::vector<std::int32_t>> items_of_user(static_cast<std::size_t>(g.n_u));
    for (const Edge& e : g.edges) items_of_user[static_cast<std::size_t>(e.first)].push_back(e.second);
    for (const Edge& e : g.test_edges)
        items_of_user[static_cast<std::size_t>(e.first)].push_back(e.second);
    if (report) {
        report->lines = static_cast<std::int64_t>(g.edges.size() + g.test_edges.size());
        report->duplicates = 0;
    }
    return finish_split(g.n_u, g.n_i, std::move(items_of_user), g.user_ids, g.item_ids,
                        split_ratio, seed, report);
}

namespace {

std::string default_id(const char* prefix, std::int64_t idx) {
    return std::string(prefix) + std::to_string(idx);
}

void write_sidecar(const std::string& path, const std::string& metadata_json) {
    if (metadata_json.empty()) return;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << metadata_json;
    if (metadata_json.back() != '\n') out << '\n';
}

}  // namespace

void save_interactions(const std::string& path, const InteractionGraph& g,
                       const std::string& metadata_json) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_interactions: cannot write " + path);
    std::vector<Edge> all = g.edges;
    all.insert(all.end(), g.test_edges.begin(), g.test_edges.end());
    std::sort(all.begin(), all.end());
    for (const Edge& e : all) {
        const std::string u = g.user_ids.empty() ? default_id("u", e.first)
                                                 : g.user_ids[static_cast<std::size_t>(e.first)];
        const std::string i = g.item_ids.empty() ? default_id("i", e.second)
                                                 : g.item_ids[static_cast<std::size_t>(e.second)];
        out << u << '\t' << i << '\n';
    }
    if (!out) throw std::runtime_error("save_interactions: write failed for " + path);
    write_sidecar(path + ".meta.json", metadata_json);
}

InteractionGraph gen_planted_bipartite(std::int64_t n_u, std::int64_t n_i,
                                       std::int64_t blocks, double p_in, double p_out,
                                       std::uint64_t seed) {
    if (n_u < 1 || n_i < 1) throw std::invalid_argument("gen_planted_bipartite: need n_u, n_i >= 1");
    if (blocks < 1 || blocks > std::min(n_u, n_i))
        throw std::invalid_argument("gen_planted_bipartite: blocks must be in [1, min(n_u, n_i)]");
    if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
        throw std::invalid_argument("gen_planted_bipartite: probabilities must be in [0, 1]");
    if (p_in < p_out) throw std::invalid_argument("gen_planted_bipartite: p_in must be >= p_out");

    auto block_of = [blocks](std::int64_t idx, std::int64_t total) {
        return idx * blocks / total;
    };
    std::vector<std::int64_t> items_in_block(static_cast<std::size_t>(blocks), 0);
    for (std::int64_t i = 0; i < n_i; ++i) ++items_in_block[static_cast<std::size_t>(block_of(i, n_i))];
    std::vector<std::vector<std::int32_t>> users_in_block(static_cast<std::size_t>(blocks));
    for (std::int64_t u = 0; u < n_u; ++u)
        users_in_block[static_cast<std::size_t>(block_of(u, n_u))].push_back(
            static_cast<std::int32_t>(u));

    for (std::int64_t b = 0; b < blocks; ++b) {
        double expected = p_in * static_cast<double>(items_in_block[static_cast<std::size_t>(b)]) +
                          p_out * static_cast<double>(n_i - items_in_block[static_cast<std::size_t>(b)]);
        if (expected < 2.0)
            throw std::invalid_argument(
                "gen_planted_bipartite: expected user degree " + std::to_string(expected) +
                " in block " + std::to_string(b) + " is below 2; infeasible");
    }

    Rng rng(mix_seed(seed, 1));
    std::vector<Edge> edges;
    std::vector<std::int64_t> item_deg(static_cast<std::size_t>(n_i), 0);
    std::vector<std::int32_t> row;
    for (std::int64_t u = 0; u < n_u; ++u) {
        std::int64_t ub = block_of(u, n_u);
        int attempts = 0;
        do {
            if (++attempts > 100000)
                throw std::runtime_error("gen_planted_bipartite: resampling failed for user " +
                                         std::to_string(u));
            row.clear();
            for (std::int64_t i = 0; i < n_i; ++i) {
                double prob = block_of(i, n_i) == ub ? p_in : p_out;
                if (rng.bernoulli(prob)) row.push_back(static_cast<std::int32_t>(i));
            }
        } while (row.size() < 2);
        for (std::int32_t i : row) {
            edges.push_back({static_cast<std::int32_t>(u), i});
            ++item_deg[static_cast<std::size_t>(i)];
        }
    }
    // Give untouched items one same-block edge so no node is isolated;
    // same-block pairs have positive probability whenever generation is
    // feasible, so the support of the model is unchanged.
    for (std::int64_t i = 0; i < n_i; ++i) {
        if (item_deg[static_cast<std::size_t>(i)] > 0) continue;
        const auto& candidates = users_in_block[static_cast<std::size_t>(block_of(i, n_i))];
        std::int32_t u = candidates[static_cast<std::size_t>(
            rng.uniform_below(static_cast<std::int64_t>(candidates.size())))];
        edges.push_back({u, static_cast<std::int32_t>(i)});
    }

    std::vector<std::string> user_ids(static_cast<std::size_t>(n_u));
    std::vector<std::string> item_ids(static_cast<std::size_t>(n_i));
    for (std::int64_t u = 0; u < n_u; ++u) user_ids[static_cast<std::size_t>(u)] = default_id("u", u);
    for (std::int64_t i = 0; i < n_i; ++i) item_ids[static_cast<std::size_t>(i)] = default_id("i", i);
    return InteractionGraph::build(n_u, n_i, std::move(edges), {}, std::move(user_ids),
                                   std::move(item_ids));
}

PlainGraph gen_csbm(const CsbmParams& params) {
    params.validate();
    Rng rng(mix_seed(params.seed, 2));

    std::vector<std::int32_t> labels(static_cast<std::size_t>(params.n));
    for (auto& l : labels) l = rng.bernoulli(0.5) ? 1 : 0;

    Matrix features(params.n, params.d);
    double sd = 1.0 / std::sqrt(static_cast<double>(params.d));
    for (std::int64_t v = 0; v < params.n; ++v) {
        const std::vector<double>& mean = labels[static_cast<std::size_t>(v)] == 1 ? params.mu
                                                                                   : params.nu;
        for (std::int64_t j = 0; j < params.d; ++j)
            features.at(v, j) = rng.gaussian(mean[static_cast<std::size_t>(j)], sd);
    }

    std::vector<Edge> edges;
    for (std::int64_t a = 0; a < params.n; ++a) {
        for (std::int64_t b = a + 1; b < params.n; ++b) {
            double prob = labels[static_cast<std::size_t>(a)] == labels[static_cast<std::size_t>(b)]
                              ? params.p
                              : params.q;
            if (rng.bernoulli(prob))
                edges.push_back({static_cast<std::int32_t>(a), static_cast<std::int32_t>(b)});
        }
    }

    std::vector<std::string> ids(static_cast<std::size_t>(params.n));
    for (std::int64_t v = 0; v < params.n; ++v) ids[static_cast<std::size_t>(v)] = default_id("n", v);
    return PlainGraph::build(params.n, std::move(edges), std::move(features), std::move(labels),
                             std::move(ids));
}

void save_node_dataset(const std::string& dir, const PlainGraph& g,
                       const std::string& metadata_json) {
    fs::create_directories(dir);
    auto node_id = [&g](std::int64_t v) {
        return g.node_ids.empty() ? default_id("n", v) : g.node_ids[static_cast<std::size_t>(v)];
    };

    {
        std::ofstream out(fs::path(dir) / "edges.tsv");
        if (!out) throw std::runtime_error("save_node_dataset: cannot write edges.tsv");
        for (const Edge& e : g.edges) out << node_id(e.first) << '\t' << node_id(e.second) << '\n';
    }
    if (g.features) {
        std::ofstream out(fs::path(dir) / "features.csv");
        if (!out) throw std::runtime_error("save_node_dataset: cannot write features.csv");
        char buf[32];
        for (std::int64_t v = 0; v < g.n; ++v) {
            out << node_id(v);
            for (std::int64_t j = 0; j < g.features->cols; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", g.features->at(v, j));
                out << ',' << buf;
            }
            out << '\n';
        }
    }
    if (!g.labels.empty()) {
        std::ofstream out(fs::path(dir) / "labels.tsv");
        if (!out) throw std::runtime_error("save_node_dataset: cannot write labels.tsv");
        for (std::int64_t v = 0; v < g.n; ++v) {
            if (g.labels[static_cast<std::size_t>(v)] >= 0)
                out << node_id(v) << '\t' << g.labels[static_cast<std::size_t>(v)] << '\n';
        }
    }
    write_sidecar((fs::path(dir) / "metadata.json").string(), metadata_json);
}

PlainGraph load_node_dataset(const std::string& dir) {
    fs::path edges_p = fs::path(dir) / "edges.tsv";
    fs::path feat_p = fs::path(dir) / "features.csv";
    fs::path lab_p = fs::path(dir) / "labels.tsv";
    if (!fs::exists(edges_p))
        throw std::runtime_error("load_node_dataset: missing edges.tsv in " + dir);

    std::unordered_map<std::string, std::int32_t> idx;
    std::vector<std::string> ids;
    bool have_features = fs::exists(feat_p);

    std::optional<Matrix> features;
    if (have_features) {
        std::ifstream in(feat_p);
        if (!in) throw std::runtime_error("load_node_dataset: cannot open features.csv");
        std::vector<std::vector<double>> rows;
        std::string line;
        std::int64_t lineno = 0;
        std::int64_t width = -1;
        while (std::getline(in, line)) {
            ++lineno;
            strip_cr(line);
            if (blank_line(line)) continue;
            std::vector<double> vals;
            std::size_t pos = line.find(',');
            if (pos == std::string::npos || pos == 0)
                throw std::runtime_error("load_node_dataset: malformed features.csv line " +
                                         std::to_string(lineno));
            std::string id = line.substr(0, pos);
            while (pos != std::string::npos) {
                std::size_t next = line.find(',', pos + 1);
                std::string field = next == std::string::npos
                                        ? line.substr(pos + 1)
                                        : line.substr(pos + 1, next - pos - 1);
                char* end = nullptr;
                double v = std::strtod(field.c_str(), &end);
                if (end == field.c_str() || *end != '\0')
                    throw std::runtime_error("load_node_dataset: malformed features.csv line " +
                                             std::to_string(lineno));
                vals.push_back(v);
                pos = next;
            }
            if (width < 0) width = static_cast<std::int64_t>(vals.size());
            if (static_cast<std::int64_t>(vals.size()) != width)
                throw std::runtime_error("load_node_dataset: ragged features.csv line " +
                                         std::to_string(lineno));
            if (!idx.try_emplace(id, static_cast<std::int32_t>(ids.size())).second)
                throw std::runtime_error("load_node_dataset: duplicate node id in features.csv: " +
                                         id);
            ids.push_back(id);
            rows.push_back(std::move(vals));
        }
        if (rows.empty()) throw std::runtime_error("load_node_dataset: empty features.csv");
        Matrix f(static_cast<std::int64_t>(rows.size()), width);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::int64_t c = 0; c < width; ++c)
                f.at(static_cast<std::int64_t>(r), c) = rows[r][static_cast<std::size_t>(c)];
        features = std::move(f);
    }

    auto resolve = [&](const std::string& id, const char* file,
                       std::int64_t lineno) -> std::int32_t {
        auto it = idx.find(id);
        if (it != idx.end()) return it->second;
        if (have_features)
            throw std::runtime_error(std::string("load_node_dataset: node id '") + id + "' in " +
                                     file + " line " + std::to_string(lineno) +
                                     " is not in features.csv");
        std::int32_t v = static_cast<std::int32_t>(ids.size());
        idx.emplace(id, v);
        ids.push_back(id);
        return v;
    };

    std::vector<Edge> edges;
    {
        std::ifstream in(edges_p);
        if (!in) throw std::runtime_error("load_node_dataset: cannot open edges.tsv");
        std::string line;
        std::int64_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            strip_cr(line);
            if (blank_line(line)) continue;
            std::size_t tab1 = line.find('\t');
            if (tab1 == std::string::npos || tab1 == 0)
                throw std::runtime_error("load_node_dataset: malformed edges.tsv line " +
                                         std::to_string(lineno));
            std::size_t tab2 = line.find('\t', tab1 + 1);
            std::string a = line.substr(0, tab1);
            std::string b = tab2 == std::string::npos ? line.substr(tab1 + 1)
                                                      : line.substr(tab1 + 1, tab2 - tab1 - 1);
            if (b.empty())
                throw std::runtime_error("load_node_dataset: malformed edges.tsv line " +
                                         std::to_string(lineno));
            edges.push_back({resolve(a, "edges.tsv", lineno), resolve(b, "edges.tsv", lineno)});
        }
    }

    std::vector<std::int32_t> labels;
    if (fs::exists(lab_p)) {
        labels.assign(ids.size(), -1);
        std::ifstream in(lab_p);
        if (!in) throw std::runtime_error("load_node_dataset: cannot open labels.tsv");
        std::string line;
        std::int64_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            strip_cr(line);
            if (blank_line(line)) continue;
            std::size_t tab = line.find('\t');
            if (tab == std::string::npos || tab == 0)
                throw std::runtime_error("load_node_dataset: malformed labels.tsv line " +
                                         std::to_string(lineno));
            std::string id = line.substr(0, tab);
            std::string field = line.substr(tab + 1);
            char* end = nullptr;
            long lab = std::strtol(field.c_str(), &end, 10);
            if (end == field.c_str() || *end != '\0' || lab < 0)
                throw std::runtime_error("load_node_dataset: malformed labels.tsv line " +
                                         std::to_string(lineno));
            std::int32_t v = resolve(id, "labels.tsv", lineno);
            if (static_cast<std::size_t>(v) >= labels.size()) labels.resize(ids.size(), -1);
            labels[static_cast<std::size_t>(v)] = static_cast<std::int32_t>(lab);
        }
    }

    std::int64_t n = static_cast<std::int64_t>(ids.size());
    return PlainGraph::build(n, std::move(edges), std::move(features), std::move(labels),
                             std::move(ids));
}

PlainGraph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_edge_list: cannot open " + path);
    std::unordered_map<std::string, std::int32_t> idx;
    std::vector<std::string> ids;
    const auto resolve = [&](const std::string& id) -> std::int32_t {
        const auto [it, fresh] = idx.try_emplace(id, static_cast<std::int32_t>(ids.size()));
        if (fresh) ids.push_back(id);
        return it->second;
    };
    std::vector<Edge> edges;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (blank_line(line)) continue;
        const std::size_t tab1 = line.find('\t');
        if (tab1 == std::string::npos || tab1 == 0)
            throw std::runtime_error("load_edge_list: malformed line " + std::to_string(lineno) +
                                     " in " + path);
        const std::size_t tab2 = line.find('\t', tab1 + 1);
        const std::string a = line.substr(0, tab1);
        const std::string b = tab2 == std::string::npos
                                  ? line.substr(tab1 + 1)
                                  : line.substr(tab1 + 1, tab2 - tab1 - 1);
        if (b.empty())
            throw std::runtime_error("load_edge_list: malformed line " + std::to_string(lineno) +
                                     " in " + path);
        edges.push_back({resolve(a), resolve(b)});
    }
    if (ids.empty()) throw std::runtime_error("load_edge_list: empty edge file " + path);
    const auto n = static_cast<std::int64_t>(ids.size());
    return PlainGraph::build(n, std::move(edges), std::nullopt, {}, std::move(ids));
}

namespace {

constexpr char kModelMagic[8] = {'G', 'R', 'C', 'L', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kModelVersion = 1;

void put_bytes(std::ostream& out, const void* p, std::size_t len) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
}

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(out, b, 8);
}

void put_i64(std::ostream& out, std::int64_t v) { put_u64(out, static_cast<std::uint64_t>(v)); }

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct ByteReader {
    std::ifstream in;
    std::string path;

    void need(void* p, std::size_t len) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
        if (static_cast<std::size_t>(in.gcount()) != len)
            throw std::runtime_error("read_model: truncated model file: " + path);
    }
    std::uint32_t u32() {
        unsigned char b[4];
        need(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        unsigned char b[8];
        need(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::uint8_t u8() {
        unsigned char b;
        need(&b, 1);
        return b;
    }
};

void put_ids(std::ostream& out, const std::vector<std::string>& ids) {
    put_u64(out, ids.size());
    for (const std::string& s : ids) {
        put_u32(out, static_cast<std::uint32_t>(s.size()));
        put_bytes(out, s.data(), s.size());
    }
}

std::vector<std::string> get_ids(ByteReader& r) {
    std::uint64_t count = r.u64();
    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        std::uint32_t len = r.u32();
        std::string s(len, '\0');
        if (len > 0) r.need(s.data(), len);
        ids.push_back(std::move(s));
    }
    return ids;
}

}  // namespace

void write_model(const std::string& path, const ModelFile& m) {
    if (m.e0.rows != m.n_u + m.n_i)
        throw std::invalid_argument("write_model: embedding rows do not match n_u + n_i");
    if (m.variant > 1) throw std::invalid_argument("write_model: bad variant tag");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_model: cannot write " + path);

    put_bytes(out, kModelMagic, sizeof kModelMagic);
    put_u32(out, kModelVersion);
    put_i64(out, m.n_u);
    put_i64(out, m.n_i);
    put_i64(out, m.e0.cols);
    put_i64(out, m.layers);
    unsigned char tags[2] = {m.variant, static_cast<unsigned char>(m.normalize ? 1 : 0)};
    put_bytes(out, tags, 2);
    for (double v : m.e0.data) put_f64(out, v);
    put_ids(out, m.user_ids);
    put_ids(out, m.item_ids);
    if (!out) throw std::runtime_error("write_model: write failed for " + path);
}

ModelFile read_model(const std::string& path) {
    ByteReader r{std::ifstream(path, std::ios::binary), path};
    if (!r.in) throw std::runtime_error("read_model: cannot open " + path);

    char magic[8];
    r.need(magic, 8);
    if (std::memcmp(magic, kModelMagic, 8) != 0)
        throw std::runtime_error("read_model: not a model file (bad magic): " + path);
    std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw std::runtime_error("read_model: unsupported model version " +
                                 std::to_string(version) + " in " + path);

    ModelFile m;
    m.n_u = r.i64();
    m.n_i = r.i64();
    std::int64_t d = r.i64();
    m.layers = r.i64();
    if (m.n_u < 0 || m.n_i < 0 || d < 1 || m.layers < 0)
        throw std::runtime_error("read_model: corrupt header in " + path);
    m.variant = r.u8();
    m.normalize = r.u8();
    if (m.variant > 1 || m.normalize > 1)
        throw std::runtime_error("read_model: corrupt header in " + path);

    m.e0 = Matrix(m.n_u + m.n_i, d);
    for (double& v : m.e0.data) v = r.f64();
    if (!all_finite(m.e0))
        throw std::runtime_error("read_model: non-finite embedding values in " + path);

    m.user_ids = get_ids(r);
    m.item_ids = get_ids(r);
    if (!m.user_ids.empty() && static_cast<std::int64_t>(m.user_ids.size()) != m.n_u)
        throw std::runtime_error("read_model: user id map size mismatch in " + path);
    if (!m.item_ids.empty() && static_cast<std::int64_t>(m.item_ids.size()) != m.n_i)
        throw std::runtime_error("read_model: item id map size mismatch in " + path);

    char extra;
    r.in.read(&extra, 1);
    if (r.in.gcount() != 0)
        throw std::runtime_error("read_model: trailing bytes in " + path);
    return m;
}

std::uint64_t fnv1a64_bytes(const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("fnv1a64_file: cannot open " + path);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof buf);
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace grcl
