#include "klm/model.hpp"

#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

namespace klm {

namespace {

std::string join_violations(const std::vector<Violation>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << "; ";
        os << v[i].condition << ": " << v[i].detail;
    }
    return os.str();
}

void require_square(const Eigen::MatrixXd& M, int n, const std::string& name) {
    if (M.rows() != n || M.cols() != n)
        throw DimensionMismatch(name + " must be " + std::to_string(n) + "x" + std::to_string(n));
}

void require_symmetric(const Eigen::MatrixXd& M, const std::string& name) {
    double scale = 1.0 + M.cwiseAbs().maxCoeff();
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw NotSymmetric(name + " must be symmetric");
}

}  // namespace

ConditionViolation::ConditionViolation(std::vector<Violation> v)
    : std::runtime_error(join_violations(v)), violations(std::move(v)) {}

std::string to_string(CouplingClass c) {
    switch (c) {
        case CouplingClass::antiferromagnetic: return "antiferromagnetic";
        case CouplingClass::ferromagnetic: return "ferromagnetic";
        default: return "mixed";
    }
}

std::vector<Violation> condition_violations(const ModelSpec& spec) {
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    if (nl < 1 || no < 1) throw DimensionMismatch("lambda and omega must be nonempty");
    require_square(spec.t, nl, "t");
    require_square(spec.U, nl, "U");
    require_square(spec.g, nl, "g");
    if (spec.J.rows() != nl || spec.J.cols() != no)
        throw DimensionMismatch("J must be |lambda| x |omega|");
    if (!(spec.omega0 > 0)) throw DimensionMismatch("omega0 must be positive");
    require_symmetric(spec.t, "t");
    require_symmetric(spec.U, "U");
    for (const Site& s : spec.lambda)
        if (s.sublattice != 1 && s.sublattice != 2)
            throw DimensionMismatch("sublattice labels must be 1 or 2");
    for (const Site& s : spec.omega)
        if (s.sublattice != 1 && s.sublattice != 2)
            throw DimensionMismatch("sublattice labels must be 1 or 2");

    std::vector<Violation> out;

    // C.1: hopping graph connected and bipartite w.r.t. the declared partition.
    {
        std::vector<int> color(nl, -1);
        std::queue<int> bfs;
        color[0] = 0;
        bfs.push(0);
        int seen = 1;
        while (!bfs.empty()) {
            int x = bfs.front();
            bfs.pop();
            for (int y = 0; y < nl; ++y) {
                if (x == y || spec.t(x, y) == 0.0) continue;
                if (color[y] < 0) {
                    color[y] = 1 - color[x];
                    bfs.push(y);
                    ++seen;
                }
            }
        }
        if (seen != nl)
            out.push_back({"C.1", "hopping graph on lambda is not connected"});
        for (int x = 0; x < nl; ++x) {
            if (spec.t(x, x) != 0.0)
                out.push_back({"C.1", "nonzero on-site t at " + spec.lambda[x].id});
            for (int y = x + 1; y < nl; ++y)
                if (spec.t(x, y) != 0.0 && spec.lambda[x].sublattice == spec.lambda[y].sublattice)
                    out.push_back({"C.1", "hopping within one sublattice: " + spec.lambda[x].id +
                                              " - " + spec.lambda[y].id});
        }
    }

    // C.2: each f site couples to something, with a consistent sign.
    for (int u = 0; u < no; ++u) {
        int sign = 0;
        bool consistent = true;
        for (int x = 0; x < nl; ++x) {
            double j = spec.J(x, u);
            if (j == 0.0) continue;
            int s = j > 0 ? 1 : -1;
            if (sign == 0)
                sign = s;
            else if (s != sign)
                consistent = false;
        }
        if (sign == 0)
            out.push_back({"C.2", "f site " + spec.omega[u].id + " has no exchange coupling"});
        else if (!consistent)
            out.push_back({"C.2", "f site " + spec.omega[u].id + " couples with both signs"});
    }

    // C.3: no exchange between matching sublattices.
    for (int x = 0; x < nl; ++x)
        for (int u = 0; u < no; ++u)
            if (spec.J(x, u) != 0.0 && spec.lambda[x].sublattice == spec.omega[u].sublattice)
                out.push_back({"C.3", "exchange between matching sublattices: " +
                                          spec.lambda[x].id + " - " + spec.omega[u].id});

    // C.4: even cardinalities.
    if (nl % 2 != 0) out.push_back({"C.4", "|lambda| must be even"});
    if (no % 2 != 0) out.push_back({"C.4", "|omega| must be even"});

    // C.5: equal g column sums.
    {
        Eigen::VectorXd sums = spec.g.colwise().sum();
        double scale = 1.0 + spec.g.cwiseAbs().maxCoeff();
        for (int y = 1; y < nl; ++y)
            if (std::abs(sums(y) - sums(0)) > 1e-12 * scale) {
                out.push_back({"C.5", "g column sums differ"});
                break;
            }
    }

    return out;
}

ValidatedModel validate(const ModelSpec& spec) {
    auto violations = condition_violations(spec);
    if (!violations.empty()) throw ConditionViolation(std::move(violations));

    ValidatedModel m;
    m.spec = spec;

    bool any_pos = false, any_neg = false;
    m.sgn_j.assign(spec.n_omega(), 0);
    for (int u = 0; u < spec.n_omega(); ++u) {
        for (int x = 0; x < spec.n_lambda(); ++x) {
            double j = spec.J(x, u);
            if (j == 0.0) continue;
            m.sgn_j[u] = j > 0 ? 1 : -1;
        }
        (m.sgn_j[u] > 0 ? any_pos : any_neg) = true;
    }
    m.coupling_class = (any_pos && any_neg) ? CouplingClass::mixed
                       : any_neg            ? CouplingClass::ferromagnetic
                                            : CouplingClass::antiferromagnetic;

    m.gamma_lambda.resize(spec.n_lambda());
    for (int x = 0; x < spec.n_lambda(); ++x)
        m.gamma_lambda[x] = spec.lambda[x].sublattice == 1 ? -1 : 1;
    m.gamma_omega.resize(spec.n_omega());
    for (int u = 0; u < spec.n_omega(); ++u)
        m.gamma_omega[u] = spec.omega[u].sublattice == 1 ? -1 : 1;

    m.common_g_column_sum = spec.g.col(0).sum();
    return m;
}

Eigen::MatrixXd effective_coulomb(const ValidatedModel& model) {
    const ModelSpec& s = model.spec;
    return s.U - (s.g * s.g.transpose()) / s.omega0;
}

bool is_positive_semidefinite(const Eigen::MatrixXd& M, double tol) {
    double scale = M.size() ? M.cwiseAbs().maxCoeff() : 0.0;
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + scale))
        throw NotSymmetric("matrix must be symmetric");
    if (tol < 0) tol = 1e-10 * (1.0 + scale);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

double predicted_total_spin(const ValidatedModel& model) {
    if (model.coupling_class == CouplingClass::mixed) throw MixedCouplingSigns();
    int l1 = 0, l2 = 0, o1 = 0, o2 = 0;
    for (const Site& s : model.spec.lambda) (s.sublattice == 1 ? l1 : l2)++;
    for (const Site& s : model.spec.omega) (s.sublattice == 1 ? o1 : o2)++;
    if (model.coupling_class == CouplingClass::antiferromagnetic)
        return 0.5 * std::abs(l1 + o1 - l2 - o2);
    return 0.5 * std::abs(l1 + o2 - l2 - o1);
}

namespace {

ModelSpec example1(int size, const ExampleParams& p) {
    if (size < 2 || size % 2 != 0) throw UnsupportedSize("example1 needs even |lambda| >= 2");
    ModelSpec s;
    const int n = size;
    for (int x = 0; x < n; ++x) s.lambda.push_back({"c" + std::to_string(x), x % 2 == 0 ? 1 : 2});
    // One f site on top of each conduction site; opposite sublattice so the
    // on-site exchange is allowed.
    for (int x = 0; x < n; ++x) s.omega.push_back({"f" + std::to_string(x), x % 2 == 0 ? 2 : 1});
    s.t = Eigen::MatrixXd::Zero(n, n);
    for (int x = 0; x + 1 < n; ++x) s.t(x, x + 1) = s.t(x + 1, x) = p.t;
    s.J = p.J * Eigen::MatrixXd::Identity(n, n);
    s.U = p.U * Eigen::MatrixXd::Identity(n, n);
    s.g = p.g * Eigen::MatrixXd::Identity(n, n);
    s.omega0 = p.omega0;
    return s;
}

// Per cell: two sublattice-1 conduction sites, four sublattice-2 conduction
// sites hanging off them, one f site on each subset. Cells are chained
// through the last decoration site.
ModelSpec example2(int cells, const ExampleParams& p) {
    if (cells < 1) throw UnsupportedSize("example2 needs at least one cell");
    ModelSpec s;
    s.omega0 = p.omega0;
    const int nl = 6 * cells;
    s.t = Eigen::MatrixXd::Zero(nl, nl);
    s.J = Eigen::MatrixXd::Zero(nl, 2 * cells);
    auto idx = [](int cell, int k) { return 6 * cell + k; };  // k=0,1: core; k=2..5: decoration
    for (int c = 0; c < cells; ++c) {
        s.lambda.push_back({"a" + std::to_string(c), 1});
        s.lambda.push_back({"b" + std::to_string(c), 1});
        for (int k = 0; k < 4; ++k)
            s.lambda.push_back({"d" + std::to_string(c) + "_" + std::to_string(k), 2});
        s.omega.push_back({"u" + std::to_string(c), 1});
        s.omega.push_back({"v" + std::to_string(c), 2});
    }
    for (int c = 0; c < cells; ++c) {
        int a = idx(c, 0), b = idx(c, 1);
        s.t(a, idx(c, 2)) = s.t(idx(c, 2), a) = p.t;
        s.t(a, idx(c, 3)) = s.t(idx(c, 3), a) = p.t;
        s.t(b, idx(c, 3)) = s.t(idx(c, 3), b) = p.t;
        s.t(b, idx(c, 4)) = s.t(idx(c, 4), b) = p.t;
        s.t(b, idx(c, 5)) = s.t(idx(c, 5), b) = p.t;
        if (c + 1 < cells) {
            int a_next = idx(c + 1, 0);
            s.t(idx(c, 5), a_next) = s.t(a_next, idx(c, 5)) = p.t;
        }
        // u (sublattice 1) couples to a decoration site, v (sublattice 2) to a core site.
        s.J(idx(c, 2), 2 * c) = p.J;
        s.J(a, 2 * c + 1) = p.J;
    }
    s.U = p.U * Eigen::MatrixXd::Identity(nl, nl);
    s.g = p.g * Eigen::MatrixXd::Identity(nl, nl);
    return s;
}

// Alternating chain with one f site per sublattice-2 conduction site and one
// per pair of sublattice-1 conduction sites.
ModelSpec example3(int size, const ExampleParams& p) {
    if (size < 8 || size % 8 != 0) throw UnsupportedSize("example3 needs |lambda| a multiple of 8");
    ModelSpec s;
    s.omega0 = p.omega0;
    const int nl = size;
    const int n1 = nl / 2;        // f sites over sublattice 2
    const int n2 = nl / 4;        // f sites over sublattice 1 pairs
    s.t = Eigen::MatrixXd::Zero(nl, nl);
    s.J = Eigen::MatrixXd::Zero(nl, n1 + n2);
    for (int x = 0; x < nl; ++x) s.lambda.push_back({"c" + std::to_string(x), x % 2 == 0 ? 1 : 2});
    for (int x = 0; x + 1 < nl; ++x) s.t(x, x + 1) = s.t(x + 1, x) = p.t;
    for (int u = 0; u < n1; ++u) {
        s.omega.push_back({"u" + std::to_string(u), 1});
        s.J(2 * u + 1, u) = p.J;  // to a sublattice-2 site
    }
    for (int v = 0; v < n2; ++v) {
        s.omega.push_back({"v" + std::to_string(v), 2});
        s.J(4 * v, n1 + v) = p.J;      // to two sublattice-1 sites
        s.J(4 * v + 2, n1 + v) = p.J;
    }
    s.U = p.U * Eigen::MatrixXd::Identity(nl, nl);
    s.g = p.g * Eigen::MatrixXd::Identity(nl, nl);
    return s;
}

ModelSpec star(const ExampleParams& p) {
    ModelSpec s;
    s.omega0 = p.omega0;
    s.lambda = {{"center", 1}, {"leaf0", 2}, {"leaf1", 2}, {"leaf2", 2}};
    s.omega = {{"u", 1}, {"v", 2}};
    s.t = Eigen::MatrixXd::Zero(4, 4);
    for (int l = 1; l < 4; ++l) s.t(0, l) = s.t(l, 0) = p.t;
    s.J = Eigen::MatrixXd::Zero(4, 2);
    for (int l = 1; l < 4; ++l) s.J(l, 0) = p.J;  // u couples to the leaves
    s.J(0, 1) = p.J;                              // v couples to the center
    s.U = p.U * Eigen::MatrixXd::Identity(4, 4);
    s.g = p.g * Eigen::MatrixXd::Identity(4, 4);
    return s;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array() || j.empty()) throw DimensionMismatch(name + " must be a nonempty 2d array");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Eigen::MatrixXd M(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(j[r].size()) != cols)
            throw DimensionMismatch(name + " rows have unequal lengths");
        for (int c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
    }
    return M;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < M.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

ModelSpec example_model(const std::string& kind, int size, const ExampleParams& p) {
    if (kind == "example1") return example1(size, p);
    if (kind == "example2") return example2(size, p);
    if (kind == "example3") return example3(size, p);
    if (kind == "star") return star(p);
    throw UnsupportedSize("unknown example kind: " + kind);
}

nlohmann::json model_to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["lambda"] = nlohmann::json::array();
    for (const Site& s : spec.lambda) j["lambda"].push_back({{"id", s.id}, {"sublattice", s.sublattice}});
    j["omega"] = nlohmann::json::array();
    for (const Site& s : spec.omega) j["omega"].push_back({{"id", s.id}, {"sublattice", s.sublattice}});
    j["t"] = matrix_to_json(spec.t);
    j["J"] = matrix_to_json(spec.J);
    j["U"] = matrix_to_json(spec.U);
    j["g"] = matrix_to_json(spec.g);
    j["omega0"] = spec.omega0;
    return j;
}

ModelSpec model_from_json(const nlohmann::json& j) {
    ModelSpec s;
    for (const auto& e : j.at("lambda"))
        s.lambda.push_back({e.at("id").get<std::string>(), e.at("sublattice").get<int>()});
    for (const auto& e : j.at("omega"))
        s.omega.push_back({e.at("id").get<std::string>(), e.at("sublattice").get<int>()});
    s.t = matrix_from_json(j.at("t"), "t");
    s.J = matrix_from_json(j.at("J"), "J");
    s.U = matrix_from_json(j.at("U"), "U");
    s.g = matrix_from_json(j.at("g"), "g");
    s.omega0 = j.at("omega0").get<double>();
    return s;
}

ModelSpec load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    return model_from_json(j);
}

}  // namespace klm
