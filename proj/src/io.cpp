#include "phident/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

namespace phident::io {

namespace {

using nlohmann::json;

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string token;
    std::istringstream in(line);
    while (std::getline(in, token, ',')) out.push_back(token);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& token, const std::filesystem::path& path,
                    std::size_t line) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end != nullptr && *end == ' ') ++end;
    if (end == begin || end == nullptr || *end != '\0')
        throw ParseError(where(path, line) + ": expected a number, got '" + token + "'");
    return v;
}

Index parse_count(const std::string& token, const std::filesystem::path& path,
                  std::size_t line) {
    const double v = parse_double(token, path, line);
    const Index n = static_cast<Index>(std::llround(v));
    if (static_cast<double>(n) != v || n < 0)
        throw ParseError(where(path, line) + ": expected a nonnegative integer, got '" +
                         token + "'");
    return n;
}

std::ifstream open_read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string() + " for reading");
    return in;
}

std::ofstream open_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    return out;
}

bool next_line(std::ifstream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in = open_read(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

template <typename T>
T json_get(const json& j, const char* key, const std::filesystem::path& path) {
    if (!j.contains(key))
        throw ParseError(path.string() + ": missing key '" + std::string(key) + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": bad value for key '" + std::string(key) +
                         "': " + e.what());
    }
}

}  // namespace

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Mat<double> read_matrix(const std::filesystem::path& path) {
    std::ifstream in = open_read(path);
    std::string line;
    if (!next_line(in, line)) throw ParseError(where(path, 1) + ": missing header");
    auto header = split_csv(line);
    if (header.size() != 2)
        throw ParseError(where(path, 1) + ": header must be 'rows,cols'");
    const Index rows = parse_count(header[0], path, 1);
    const Index cols = parse_count(header[1], path, 1);

    Mat<double> m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const std::size_t line_no = static_cast<std::size_t>(i) + 2;
        if (!next_line(in, line))
            throw ParseError(where(path, line_no) + ": unexpected end of file, expected row " +
                             std::to_string(i + 1) + " of " + std::to_string(rows));
        auto tokens = split_csv(line);
        if (static_cast<Index>(tokens.size()) != cols)
            throw ParseError(where(path, line_no) + ": expected " + std::to_string(cols) +
                             " values, got " + std::to_string(tokens.size()));
        for (Index j = 0; j < cols; ++j) m(i, j) = parse_double(tokens[j], path, line_no);
    }
    return m;
}

void write_matrix(const std::filesystem::path& path, const Mat<double>& m) {
    std::ofstream out = open_write(path);
    out << m.rows() << ',' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ',';
            out << format_value(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw ParseError("failed writing " + path.string());
}

Signal<double> read_signal(const std::filesystem::path& path) {
    std::ifstream in = open_read(path);
    std::string line;
    if (!next_line(in, line)) throw ParseError(where(path, 1) + ": missing header");
    auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "t")
        throw ParseError(where(path, 1) + ": header must be 't,c1,...,ck'");
    const Index dim = static_cast<Index>(header.size()) - 1;

    std::vector<double> times;
    std::vector<double> values;
    std::size_t line_no = 1;
    while (next_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto tokens = split_csv(line);
        if (static_cast<Index>(tokens.size()) != dim + 1)
            throw ParseError(where(path, line_no) + ": expected " + std::to_string(dim + 1) +
                             " values, got " + std::to_string(tokens.size()));
        times.push_back(parse_double(tokens[0], path, line_no));
        for (Index j = 0; j < dim; ++j)
            values.push_back(parse_double(tokens[static_cast<std::size_t>(j) + 1], path,
                                          line_no));
    }
    if (times.size() < 2)
        throw ParseError(path.string() + ": a signal needs at least two nodes");

    const double dt = times[1] - times[0];
    if (std::abs(times[0]) > 1e-12 || !(dt > 0))
        throw ParseError(path.string() + ": time column must start at 0 and increase");
    const double horizon = dt * static_cast<double>(times.size() - 1);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (std::abs(times[i] - dt * static_cast<double>(i)) >
            1e-9 * std::max(1.0, horizon))
            throw ParseError(where(path, i + 2) + ": time column is not uniformly spaced");
    }

    TimeGrid<double> grid(horizon, dt);
    if (grid.nodes() != static_cast<Index>(times.size()))
        throw ParseError(path.string() + ": inconsistent node count");
    Mat<double> samples(grid.nodes(), dim);
    for (Index i = 0; i < samples.rows(); ++i)
        for (Index j = 0; j < dim; ++j)
            samples(i, j) = values[static_cast<std::size_t>(i * dim + j)];
    return Signal<double>(grid, std::move(samples));
}

void write_signal(const std::filesystem::path& path, const Signal<double>& signal) {
    std::ofstream out = open_write(path);
    out << 't';
    for (Index j = 0; j < signal.dim(); ++j) out << ",c" << (j + 1);
    out << '\n';
    for (Index i = 0; i < signal.samples.rows(); ++i) {
        out << format_value(signal.grid.time(i));
        for (Index j = 0; j < signal.dim(); ++j)
            out << ',' << format_value(signal.samples(i, j));
        out << '\n';
    }
    if (!out) throw ParseError("failed writing " + path.string());
}

PhSystem<double> read_system(const std::filesystem::path& dir) {
    Mat<double> j = read_matrix(dir / "J.csv");
    Mat<double> g = read_matrix(dir / "G.csv");
    Mat<double> q = read_matrix(dir / "Q.csv");
    Mat<double> b = read_matrix(dir / "B.csv");
    Mat<double> x0 = read_matrix(dir / "x0.csv");

    const std::filesystem::path meta_path = dir / "meta.json";
    json meta = read_json(meta_path);
    const Index n = json_get<Index>(meta, "n", meta_path);
    const Index m = json_get<Index>(meta, "m", meta_path);
    const Index r = json_get<Index>(meta, "r", meta_path);
    if (j.rows() != n || q.rows() != n || b.rows() != n || g.rows() != n ||
        b.cols() != m || g.cols() != r || x0.rows() != n || x0.cols() != 1)
        throw ParseError(dir.string() + ": matrix shapes disagree with meta.json");

    return PhSystem<double>(SkewMatrix<double>(j), PsdFactor<double>(g), SpdMatrix<double>(q),
                            std::move(b), Vec<double>(x0.col(0)));
}

void write_system(const std::filesystem::path& dir, const PhSystem<double>& sys) {
    std::filesystem::create_directories(dir);
    write_matrix(dir / "J.csv", sys.J.mat());
    write_matrix(dir / "G.csv", sys.G.factor());
    write_matrix(dir / "Q.csv", sys.Q.mat());
    write_matrix(dir / "B.csv", sys.B);
    write_matrix(dir / "x0.csv", Mat<double>(sys.x0));
    json meta;
    meta["n"] = sys.n();
    meta["m"] = sys.m();
    meta["r"] = sys.r();
    std::ofstream out = open_write(dir / "meta.json");
    out << meta.dump(2) << '\n';
    if (!out) throw ParseError("failed writing " + (dir / "meta.json").string());
}

Dataset read_dataset(const std::filesystem::path& dir) {
    Signal<double> u = read_signal(dir / "u.csv");
    Signal<double> y_data = read_signal(dir / "y_data.csv");
    if (!u.grid.same_as(y_data.grid))
        throw ParseError(dir.string() + ": u.csv and y_data.csv grids differ");

    const std::filesystem::path meta_path = dir / "meta.json";
    json meta = read_json(meta_path);
    DatasetMeta out;
    out.horizon = json_get<double>(meta, "T", meta_path);
    out.dt = json_get<double>(meta, "dt", meta_path);
    out.m = json_get<Index>(meta, "m", meta_path);
    out.sigma = json_get<double>(meta, "sigma", meta_path);
    out.seed = json_get<std::uint64_t>(meta, "seed", meta_path);
    out.generator = json_get<std::string>(meta, "generator", meta_path);

    if (std::abs(out.horizon - u.grid.T) > 1e-9 * std::max(1.0, out.horizon) ||
        std::abs(out.dt - u.grid.dt) > 1e-12 * out.dt)
        throw ParseError(meta_path.string() + ": grid disagrees with the signal files");
    if (out.m != y_data.dim())
        throw ParseError(meta_path.string() + ": channel count disagrees with y_data.csv");

    std::optional<PhSystem<double>> reference;
    if (std::filesystem::exists(dir / "system" / "meta.json"))
        reference = read_system(dir / "system");
    return Dataset{std::move(u), std::move(y_data), std::move(out), std::move(reference)};
}

void write_dataset(const std::filesystem::path& dir, const Signal<double>& u,
                   const Signal<double>& y_data, const DatasetMeta& meta,
                   const PhSystem<double>* reference) {
    std::filesystem::create_directories(dir);
    write_signal(dir / "u.csv", u);
    write_signal(dir / "y_data.csv", y_data);
    json j;
    j["T"] = meta.horizon;
    j["dt"] = meta.dt;
    j["m"] = meta.m;
    j["sigma"] = meta.sigma;
    j["seed"] = meta.seed;
    j["generator"] = meta.generator;
    std::ofstream out = open_write(dir / "meta.json");
    out << j.dump(2) << '\n';
    if (!out) throw ParseError("failed writing " + (dir / "meta.json").string());
    if (reference != nullptr) write_system(dir / "system", *reference);
}

void write_report_csv(const std::filesystem::path& path, const RunReport<double>& report) {
    std::ofstream out = open_write(path);
    out << "iter,cost,grad_norm,step_size,backtracks,dist_J,dist_R,dist_Q,dist_B,"
           "skew_J,min_eig_Q,min_eig_R\n";
    for (const auto& row : report.rows) {
        out << row.iter << ',' << format_value(row.cost) << ',' << format_value(row.grad_norm)
            << ',' << format_value(row.step_size) << ',' << row.backtracks << ','
            << format_value(row.dist_j) << ',' << format_value(row.dist_r) << ','
            << format_value(row.dist_q) << ',' << format_value(row.dist_b) << ','
            << format_value(row.skew_j) << ',' << format_value(row.min_eig_q) << ','
            << format_value(row.min_eig_r) << '\n';
    }
    if (!out) throw ParseError("failed writing " + path.string());
}

void write_summary_json(const std::filesystem::path& path, const RunReport<double>& report) {
    json j;
    j["initial_cost"] = report.initial_cost();
    j["final_cost"] = report.final_cost();
    j["ratio"] = report.ratio();
    j["iterations"] = report.iterations();
    j["termination_reason"] = report.termination_reason;
    std::ofstream out = open_write(path);
    out << j.dump(2) << '\n';
    if (!out) throw ParseError("failed writing " + path.string());
}

}  // namespace phident::io
