#include "domino/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace domino {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";  // folds -0
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace {

Json matrix_rows(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (int r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json vector_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (int k = 0; k < v.size(); ++k) out.push_back(v[k]);
    return out;
}

Eigen::MatrixXd matrix_from(const Json& j, int rows, int cols, const std::string& what) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        throw std::invalid_argument(what + ": expected " + std::to_string(rows) + " rows");
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols)
            throw std::invalid_argument(what + "[" + std::to_string(r) + "]: expected " + std::to_string(cols) +
                                        " entries");
        for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

Eigen::VectorXd vector_from(const Json& j, int n, const std::string& what) {
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw std::invalid_argument(what + ": expected " + std::to_string(n) + " entries");
    Eigen::VectorXd v(n);
    for (int k = 0; k < n; ++k) v[k] = j[k].get<double>();
    return v;
}

}  // namespace

Json mdp_to_json(const TabularMdp& mdp) {
    const int S = mdp.num_states, A = mdp.num_actions;
    Json t = Json::array();
    for (int s = 0; s < S; ++s) {
        Json per_action = Json::array();
        for (int a = 0; a < A; ++a) {
            Json row = Json::array();
            for (int sp = 0; sp < S; ++sp) row.push_back(mdp.transition(mdp.index(s, a), sp));
            per_action.push_back(std::move(row));
        }
        t.push_back(std::move(per_action));
    }
    Json j;
    j["num_states"] = S;
    j["num_actions"] = A;
    j["transition"] = std::move(t);
    j["reward"] = matrix_rows(mdp.reward);
    j["features"] = matrix_rows(mdp.features);
    j["discount"] = mdp.discount;
    j["initial_dist"] = vector_json(mdp.initial_dist);
    return j;
}

TabularMdp mdp_from_json(const Json& j) {
    TabularMdp mdp;
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    const int S = mdp.num_states, A = mdp.num_actions;
    if (S < 1 || A < 1) throw InvalidMdp("num_states and num_actions must be >= 1");
    const Json& t = j.at("transition");
    if (!t.is_array() || static_cast<int>(t.size()) != S) throw InvalidMdp("transition: expected S entries");
    mdp.transition.resize(S * A, S);
    for (int s = 0; s < S; ++s) {
        const Eigen::MatrixXd rows = matrix_from(t[s], A, S, "transition[" + std::to_string(s) + "]");
        for (int a = 0; a < A; ++a) mdp.transition.row(mdp.index(s, a)) = rows.row(a);
    }
    mdp.reward = matrix_from(j.at("reward"), S, A, "reward");
    const Json& f = j.at("features");
    if (!f.is_array() || f.empty() || !f[0].is_array()) throw InvalidMdp("features: expected (S*A) x d rows");
    mdp.features = matrix_from(f, S * A, static_cast<int>(f[0].size()), "features");
    mdp.discount = j.at("discount").get<double>();
    mdp.initial_dist = vector_from(j.at("initial_dist"), S, "initial_dist");
    validate_mdp(mdp);
    return mdp;
}

Json policy_set_to_json(const PolicySet& set) {
    Json j;
    Json pols = Json::array();
    for (const Policy& p : set.policies) pols.push_back(matrix_rows(p.probs));
    j["policies"] = std::move(pols);
    j["mu"] = vector_json(set.mu);
    j["first_pinned"] = set.first_pinned;
    j["avg_value"] = vector_json(set.avg_value);
    j["avg_psi"] = matrix_rows(set.avg_psi);
    j["vstar_estimate"] = set.vstar_estimate;
    return j;
}

PolicySet policy_set_from_json(const Json& j) {
    PolicySet set;
    const Json& pols = j.at("policies");
    if (!pols.is_array() || pols.empty()) throw std::invalid_argument("policies: expected a non-empty array");
    const int n = static_cast<int>(pols.size());
    for (int i = 0; i < n; ++i) {
        const Json& rows = pols[i];
        if (!rows.is_array() || rows.empty() || !rows[0].is_array())
            throw std::invalid_argument("policies[" + std::to_string(i) + "]: expected S x A rows");
        Policy p;
        p.probs = matrix_from(rows, static_cast<int>(rows.size()), static_cast<int>(rows[0].size()),
                              "policies[" + std::to_string(i) + "]");
        set.policies.push_back(std::move(p));
    }
    set.mu = vector_from(j.at("mu"), n, "mu");
    set.first_pinned = j.value("first_pinned", true);
    set.avg_value = vector_from(j.at("avg_value"), n, "avg_value");
    const Json& psi = j.at("avg_psi");
    if (!psi.is_array() || static_cast<int>(psi.size()) != n || !psi[0].is_array())
        throw std::invalid_argument("avg_psi: expected n rows");
    set.avg_psi = matrix_from(psi, n, static_cast<int>(psi[0].size()), "avg_psi");
    set.vstar_estimate = j.at("vstar_estimate").get<double>();
    return set;
}

Json grid_spec_to_json(const GridSpec& spec) {
    Json j;
    j["type"] = "gridworld";
    j["width"] = spec.width;
    j["height"] = spec.height;
    Json walls = Json::array();
    for (const Cell& c : spec.walls) walls.push_back({c.row, c.col});
    j["walls"] = std::move(walls);
    Json goals = Json::array();
    for (const auto& [c, r] : spec.goal_cells) goals.push_back({{"cell", {c.row, c.col}}, {"reward", r}});
    j["goals"] = std::move(goals);
    j["start"] = {spec.start.row, spec.start.col};
    j["slip_prob"] = spec.slip_prob;
    j["features"] = to_string(spec.feature_kind);
    j["discount"] = spec.discount;
    return j;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

Json read_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

}  // namespace domino
