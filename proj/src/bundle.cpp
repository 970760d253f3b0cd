#include "netimpute/bundle.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace netimpute {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

struct CsvFile {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;   // data rows
    std::vector<long> line_no;
};

CsvFile read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    CsvFile f;
    f.path = path;
    std::string line;
    long ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv(line);
        if (f.header.empty()) {
            f.header = std::move(fields);
        } else {
            f.rows.push_back(std::move(fields));
            f.line_no.push_back(ln);
        }
    }
    if (f.header.empty()) throw ValidationError(path + ": missing header row");
    return f;
}

long parse_long(const CsvFile& f, std::size_t row, std::size_t col) {
    const std::string& s = f.rows[row][col];
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(f.path + ":" + std::to_string(f.line_no[row]) +
                              ": cannot parse integer '" + s + "'");
    }
}

double parse_real(const CsvFile& f, std::size_t row, std::size_t col) {
    const std::string& s = f.rows[row][col];
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(f.path + ":" + std::to_string(f.line_no[row]) +
                              ": cannot parse number '" + s + "'");
    }
}

void expect_cols(const CsvFile& f, std::size_t row, std::size_t n) {
    if (f.rows[row].size() != n)
        throw ValidationError(f.path + ":" + std::to_string(f.line_no[row]) + ": expected " +
                              std::to_string(n) + " fields, got " +
                              std::to_string(f.rows[row].size()));
}

// node-indexed table: first column is the node id, each id exactly once
Matrix read_node_table(const CsvFile& f, int n_nodes, int n_cols) {
    Matrix out(n_nodes, n_cols);
    std::vector<char> seen(n_nodes, 0);
    for (std::size_t r = 0; r < f.rows.size(); ++r) {
        expect_cols(f, r, 1 + n_cols);
        const long id = parse_long(f, r, 0);
        if (id < 0 || id >= n_nodes)
            throw ValidationError(f.path + ":" + std::to_string(f.line_no[r]) +
                                  ": node id out of range");
        if (seen[id])
            throw ValidationError(f.path + ":" + std::to_string(f.line_no[r]) +
                                  ": duplicate node id " + std::to_string(id));
        seen[id] = 1;
        for (int c = 0; c < n_cols; ++c) out(id, c) = parse_real(f, r, c + 1);
    }
    for (int i = 0; i < n_nodes; ++i)
        if (!seen[i]) throw ValidationError(f.path + ": node " + std::to_string(i) + " missing");
    return out;
}

}  // namespace

DataBundle load_bundle(const BundlePaths& paths) {
    DataBundle bundle;

    const CsvFile cov = read_csv(paths.covariates);
    const int d_x = static_cast<int>(cov.header.size()) - 1;
    if (d_x < 0 || cov.header[0] != "node")
        throw ValidationError(paths.covariates + ": header must start with 'node'");
    bundle.n_nodes = static_cast<int>(cov.rows.size());
    if (bundle.n_nodes < 2) throw ValidationError(paths.covariates + ": need at least 2 nodes");
    bundle.covariates = read_node_table(cov, bundle.n_nodes, d_x);

    const CsvFile smp = read_csv(paths.sampled);
    std::vector<char> in_s(bundle.n_nodes, 0);
    for (std::size_t r = 0; r < smp.rows.size(); ++r) {
        expect_cols(smp, r, 1);
        const long id = parse_long(smp, r, 0);
        if (id < 0 || id >= bundle.n_nodes)
            throw ValidationError(paths.sampled + ":" + std::to_string(smp.line_no[r]) +
                                  ": node id out of range");
        if (in_s[id])
            throw ValidationError(paths.sampled + ":" + std::to_string(smp.line_no[r]) +
                                  ": duplicate sampled id " + std::to_string(id));
        in_s[id] = 1;
        bundle.sampled.push_back(static_cast<int>(id));
    }
    std::sort(bundle.sampled.begin(), bundle.sampled.end());
    if (bundle.sampled.empty()) throw ValidationError(paths.sampled + ": sampled set is empty");

    const CsvFile edg = read_csv(paths.edges);
    for (std::size_t r = 0; r < edg.rows.size(); ++r) {
        expect_cols(edg, r, 2);
        const long i = parse_long(edg, r, 0);
        const long j = parse_long(edg, r, 1);
        if (i < 0 || i >= bundle.n_nodes || j < 0 || j >= bundle.n_nodes)
            throw ValidationError(paths.edges + ":" + std::to_string(edg.line_no[r]) +
                                  ": edge endpoint out of range");
        if (i == j)
            throw ValidationError(paths.edges + ":" + std::to_string(edg.line_no[r]) +
                                  ": self-loop not allowed");
        if (!in_s[i] && !in_s[j]) {
            // unobservable under egocentric sampling
            ++bundle.rejected_edges;
            continue;
        }
        bundle.edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }

    if (!paths.outcomes.empty()) {
        const CsvFile out = read_csv(paths.outcomes);
        const Matrix y = read_node_table(out, bundle.n_nodes, 1);
        bundle.outcomes = y.col(0);
    }
    if (!paths.w_covariates.empty()) {
        const CsvFile wf = read_csv(paths.w_covariates);
        const int d_w = static_cast<int>(wf.header.size()) - 1;
        if (d_w < 1) throw ValidationError(paths.w_covariates + ": needs at least one column");
        bundle.w_covariates = read_node_table(wf, bundle.n_nodes, d_w);
    }
    return bundle;
}

PartialNetwork DataBundle::to_partial() const {
    Matrix adj = Matrix::Zero(n_nodes, n_nodes);
    for (const auto& [i, j] : edges) {
        adj(i, j) = 1.0;
        adj(j, i) = 1.0;
    }
    return make_partial_network(Network{n_nodes, std::move(adj)}, sampled);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void save_bundle(const std::string& dir, const DataBundle& bundle) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream f(fs::path(dir) / "covariates.csv");
        if (!f) throw IoError("cannot write covariates.csv in " + dir);
        f << "node";
        for (int d = 0; d < bundle.covariates.cols(); ++d) f << ",x" << (d + 1);
        f << "\n";
        for (int i = 0; i < bundle.n_nodes; ++i) {
            f << i;
            for (int d = 0; d < bundle.covariates.cols(); ++d)
                f << "," << format_double(bundle.covariates(i, d));
            f << "\n";
        }
    }
    {
        std::ofstream f(fs::path(dir) / "edges.csv");
        if (!f) throw IoError("cannot write edges.csv in " + dir);
        f << "i,j\n";
        for (const auto& [i, j] : bundle.edges) f << i << "," << j << "\n";
    }
    {
        std::ofstream f(fs::path(dir) / "sampled.csv");
        if (!f) throw IoError("cannot write sampled.csv in " + dir);
        f << "node\n";
        for (const int s : bundle.sampled) f << s << "\n";
    }
    if (bundle.outcomes) {
        std::ofstream f(fs::path(dir) / "outcomes.csv");
        if (!f) throw IoError("cannot write outcomes.csv in " + dir);
        f << "node,y\n";
        for (int i = 0; i < bundle.n_nodes; ++i)
            f << i << "," << format_double((*bundle.outcomes)(i)) << "\n";
    }
    if (bundle.w_covariates) {
        std::ofstream f(fs::path(dir) / "wcov.csv");
        if (!f) throw IoError("cannot write wcov.csv in " + dir);
        f << "node";
        for (int d = 0; d < bundle.w_covariates->cols(); ++d) f << ",w" << (d + 1);
        f << "\n";
        for (int i = 0; i < bundle.n_nodes; ++i) {
            f << i;
            for (int d = 0; d < bundle.w_covariates->cols(); ++d)
                f << "," << format_double((*bundle.w_covariates)(i, d));
            f << "\n";
        }
    }
}

void save_matrix_csv(const std::string& path, const Matrix& m) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) f << ",";
            f << format_double(m(i, j));
        }
        f << "\n";
    }
}

Matrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    long ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& s : fields) {
            try {
                row.push_back(std::stod(s));
            } catch (const std::exception&) {
                throw ValidationError(path + ":" + std::to_string(ln) + ": cannot parse '" + s +
                                      "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError(path + ":" + std::to_string(ln) + ": ragged matrix row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(path + ": empty matrix file");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

void save_provenance_csv(const std::string& path,
                         const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& prov) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    for (int i = 0; i < prov.rows(); ++i) {
        for (int j = 0; j < prov.cols(); ++j) {
            if (j) f << ",";
            f << static_cast<int>(prov(i, j));
        }
        f << "\n";
    }
}

void save_key_values(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

std::map<std::string, std::string> load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::map<std::string, std::string> out;
    std::string line;
    long ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(ln) + ": expected key=value");
        out[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    return out;
}

}  // namespace netimpute
