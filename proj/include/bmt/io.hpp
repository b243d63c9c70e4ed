#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmt/measure.hpp"
#include "bmt/stochastic.hpp"
#include "bmt/system.hpp"

namespace bmt::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// low-level helpers
// ---------------------------------------------------------------------------

/// Shortest-exact decimal form: %.17g always round-trips a double.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("csv: bad number '" + s + "'");
    return v;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("io: cannot write " + path.string());
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("io: cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// trajectory CSV: header t,x1..xn,u1..um,y1..yp; u/y blank on the t=T row
// ---------------------------------------------------------------------------

inline std::string trajectory_csv(const Trajectory& traj) {
    traj.validate();
    std::ostringstream out;
    out << "t";
    for (int i = 1; i <= traj.state_dim(); ++i) out << ",x" << i;
    for (int i = 1; i <= traj.input_dim(); ++i) out << ",u" << i;
    for (int i = 1; i <= traj.output_dim(); ++i) out << ",y" << i;
    out << "\n";
    for (int t = 0; t <= traj.horizon(); ++t) {
        out << t;
        for (int i = 0; i < traj.state_dim(); ++i) out << "," << fmt(traj.states[t][i]);
        const bool last = t == traj.horizon();
        for (int i = 0; i < traj.input_dim(); ++i)
            out << "," << (last ? "" : fmt(traj.inputs[t][i]));
        for (int i = 0; i < traj.output_dim(); ++i)
            out << "," << (last ? "" : fmt(traj.outputs[t][i]));
        out << "\n";
    }
    return out.str();
}

inline Trajectory parse_trajectory_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("trajectory csv: empty");
    int n_x = 0, n_u = 0, n_y = 0;
    for (const auto& col : split_csv(line)) {
        if (col.empty() || col == "t") continue;
        if (col[0] == 'x') ++n_x;
        if (col[0] == 'u') ++n_u;
        if (col[0] == 'y') ++n_y;
    }
    Trajectory traj;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != 1 + n_x + n_u + n_y)
            throw std::invalid_argument("trajectory csv: wrong column count");
        Vector x(n_x);
        for (int i = 0; i < n_x; ++i) x[i] = parse_double(cells[1 + i]);
        traj.states.push_back(std::move(x));
        bool has_step = false;
        if (n_u > 0)
            has_step = !cells[1 + n_x].empty();
        else if (n_y > 0)
            has_step = !cells[1 + n_x + n_u].empty();
        if (has_step) {
            Vector u(n_u), y(n_y);
            for (int i = 0; i < n_u; ++i) u[i] = parse_double(cells[1 + n_x + i]);
            for (int i = 0; i < n_y; ++i) y[i] = parse_double(cells[1 + n_x + n_u + i]);
            traj.inputs.push_back(std::move(u));
            traj.outputs.push_back(std::move(y));
        }
    }
    traj.validate();
    return traj;
}

// ---------------------------------------------------------------------------
// matrix CSV: "rows,cols" on line 1, then row-major values
// ---------------------------------------------------------------------------

inline std::string matrix_csv(const Matrix& m) {
    std::ostringstream out;
    out << m.rows() << "," << m.cols() << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m(i, j));
        out << "\n";
    }
    return out.str();
}

inline Matrix parse_matrix_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("matrix csv: empty");
    const auto dims = split_csv(line);
    if (dims.size() != 2) throw std::invalid_argument("matrix csv: bad header");
    const int rows = std::stoi(dims[0]), cols = std::stoi(dims[1]);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw std::invalid_argument("matrix csv: truncated");
        const auto cells = split_csv(line);
        if (static_cast<int>(cells.size()) != cols)
            throw std::invalid_argument("matrix csv: wrong column count");
        for (int j = 0; j < cols; ++j) m(i, j) = parse_double(cells[j]);
    }
    return m;
}

// ---------------------------------------------------------------------------
// scalar-list CSV: one value per line (residual lists, singular values)
// ---------------------------------------------------------------------------

inline std::string value_list_csv(const std::vector<double>& values) {
    std::ostringstream out;
    for (double v : values) out << fmt(v) << "\n";
    return out.str();
}

inline std::vector<double> parse_value_list_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<double> out;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(parse_double(line));
    return out;
}

// ---------------------------------------------------------------------------
// moment-table CSV: i,j,k,value
// ---------------------------------------------------------------------------

inline std::string moment_table_csv(const MomentTable& table) {
    std::ostringstream out;
    out << "i,j,k,value\n";
    for (const auto& [key, value] : table)
        out << key[0] << "," << key[1] << "," << key[2] << "," << fmt(value) << "\n";
    return out.str();
}

inline MomentTable parse_moment_table_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    MomentTable table;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 4) throw std::invalid_argument("moment csv: wrong column count");
        table[{std::stoi(cells[0]), std::stoi(cells[1]), std::stoi(cells[2])}] =
            parse_double(cells[3]);
    }
    return table;
}

// ---------------------------------------------------------------------------
// projection-cloud CSV: e_xu,e_xnext
// ---------------------------------------------------------------------------

inline std::string cloud_csv(const std::vector<std::array<double, 2>>& points) {
    std::ostringstream out;
    out << "e_xu,e_xnext\n";
    for (const auto& p : points) out << fmt(p[0]) << "," << fmt(p[1]) << "\n";
    return out.str();
}

inline std::vector<std::array<double, 2>> parse_cloud_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::array<double, 2>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != 2) throw std::invalid_argument("cloud csv: wrong column count");
        out.push_back({parse_double(cells[0]), parse_double(cells[1])});
    }
    return out;
}

// ---------------------------------------------------------------------------
// system JSON: kind tag "lti" | "poly", matrices as nested row-major arrays,
// polynomial terms as {"exps": [...], "coef": r}
// ---------------------------------------------------------------------------

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j) {
    const int rows = static_cast<int>(j.size());
    if (rows == 0) return Matrix(0, 0);
    const int cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw std::invalid_argument("system json: ragged matrix");
        for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Vector vector_from_json(const json& j) {
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

inline json lti_to_json(const LtiSystem& sys) {
    json j;
    j["kind"] = "lti";
    j["A"] = matrix_to_json(sys.A);
    j["B"] = matrix_to_json(sys.B);
    j["C"] = matrix_to_json(sys.C);
    j["D"] = matrix_to_json(sys.D);
    return j;
}

inline json poly_to_json(const PolynomialSystem& sys) {
    auto polys_to_json = [](const std::vector<Polynomial>& ps) {
        json out = json::array();
        for (const auto& p : ps) {
            json terms = json::array();
            for (const auto& t : p) terms.push_back({{"exps", t.exps}, {"coef", t.coef}});
            out.push_back(std::move(terms));
        }
        return out;
    };
    auto bounds_to_json = [](const std::vector<Interval>& b) {
        json out = json::array();
        for (const auto& iv : b) out.push_back({iv.lo, iv.hi});
        return out;
    };
    json j;
    j["kind"] = "poly";
    j["n_x"] = sys.n_x;
    j["n_u"] = sys.n_u;
    j["f"] = polys_to_json(sys.f_coeffs);
    j["h"] = polys_to_json(sys.h_coeffs);
    if (!sys.x_bounds.empty()) j["x_bounds"] = bounds_to_json(sys.x_bounds);
    if (!sys.u_bounds.empty()) j["u_bounds"] = bounds_to_json(sys.u_bounds);
    if (!sys.y_bounds.empty()) j["y_bounds"] = bounds_to_json(sys.y_bounds);
    return j;
}

inline LtiSystem lti_from_json(const json& j) {
    return LtiSystem(matrix_from_json(j.at("A")), matrix_from_json(j.at("B")),
                     matrix_from_json(j.at("C")), matrix_from_json(j.at("D")));
}

inline PolynomialSystem poly_from_json(const json& j) {
    auto polys_from_json = [](const json& arr) {
        std::vector<Polynomial> out;
        for (const auto& pj : arr) {
            Polynomial p;
            for (const auto& tj : pj)
                p.push_back({tj.at("exps").get<std::vector<int>>(), tj.at("coef").get<double>()});
            out.push_back(std::move(p));
        }
        return out;
    };
    auto bounds_from_json = [](const json& arr) {
        std::vector<Interval> out;
        for (const auto& b : arr) out.push_back({b[0].get<double>(), b[1].get<double>()});
        return out;
    };
    PolynomialSystem sys(j.at("n_x").get<int>(), j.at("n_u").get<int>(),
                         polys_from_json(j.at("f")),
                         j.contains("h") ? polys_from_json(j.at("h")) : std::vector<Polynomial>{});
    if (j.contains("x_bounds")) sys.x_bounds = bounds_from_json(j["x_bounds"]);
    if (j.contains("u_bounds")) sys.u_bounds = bounds_from_json(j["u_bounds"]);
    if (j.contains("y_bounds")) sys.y_bounds = bounds_from_json(j["y_bounds"]);
    return sys;
}

// ---------------------------------------------------------------------------
// path-measure JSON: {"T": int, "atoms": [{"w": r, "traj": csv-or-file-ref}]}
// ---------------------------------------------------------------------------

inline json path_measure_to_json(const PathMeasure& mu) {
    json j;
    j["T"] = mu.horizon();
    json atoms = json::array();
    for (const auto& a : mu.atoms())
        atoms.push_back({{"w", a.weight}, {"traj", trajectory_csv(a.traj)}});
    j["atoms"] = std::move(atoms);
    return j;
}

inline PathMeasure path_measure_from_json(const json& j,
                                          const std::filesystem::path& base_dir = {}) {
    std::vector<PathMeasure::Atom> atoms;
    for (const auto& aj : j.at("atoms")) {
        const auto& tj = aj.at("traj");
        std::string csv;
        if (tj.is_string())
            csv = tj.get<std::string>();
        else if (tj.is_object() && tj.contains("file"))
            csv = read_file(base_dir / tj["file"].get<std::string>());
        else
            throw std::invalid_argument("path measure json: traj must be csv text or file ref");
        atoms.push_back({aj.at("w").get<double>(), parse_trajectory_csv(csv)});
    }
    PathMeasure mu(std::move(atoms));
    if (j.contains("T") && mu.horizon() != j["T"].get<int>())
        throw std::invalid_argument("path measure json: horizon mismatch");
    return mu;
}

// ---------------------------------------------------------------------------
// stochastic JSON: kernels as nested arrays [t][state][input][next_state],
// finite path measures with integer alphabets
// ---------------------------------------------------------------------------

inline json kernel_to_json(const FiniteKernel& k) { return json(k.table()); }

inline FiniteKernel kernel_from_json(const json& j) {
    return FiniteKernel(j.get<FiniteKernel::Table>());
}

inline json finite_path_measure_to_json(const FinitePathMeasure& mu) {
    json j;
    j["T"] = mu.horizon();
    j["num_states"] = mu.num_states();
    j["num_inputs"] = mu.num_inputs();
    json atoms = json::array();
    for (const auto& a : mu.atoms()) {
        json steps = json::array();
        for (const auto& [s, u] : a.path.steps) steps.push_back({s, u});
        atoms.push_back({{"w", a.weight}, {"steps", std::move(steps)}, {"final", a.path.final_state}});
    }
    j["atoms"] = std::move(atoms);
    return j;
}

inline FinitePathMeasure finite_path_measure_from_json(const json& j) {
    std::vector<FinitePathMeasure::Atom> atoms;
    for (const auto& aj : j.at("atoms")) {
        FinitePath path;
        for (const auto& sj : aj.at("steps"))
            path.steps.emplace_back(sj[0].get<int>(), sj[1].get<int>());
        path.final_state = aj.at("final").get<int>();
        atoms.push_back({aj.at("w").get<double>(), std::move(path)});
    }
    return FinitePathMeasure(std::move(atoms), j.at("num_states").get<int>(),
                             j.at("num_inputs").get<int>());
}

}  // namespace bmt::io
