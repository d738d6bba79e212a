#pragma once

#include "phident/optimizer.hpp"
#include "phident/system.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace phident::io {

// All file formats store floating-point values with 17 significant digits,
// which round-trips IEEE doubles exactly: write-then-read is bit-identical.
//
//   matrix CSV   first line "rows,cols", then one comma-separated line per row
//   signal CSV   first line "t,c1,...,ck", then one line per grid node
//   system dir   J.csv, G.csv, Q.csv, B.csv, x0.csv (n-by-1) + meta.json {n, m, r}
//   dataset dir  u.csv, y_data.csv, meta.json {T, dt, m, sigma, seed, generator},
//                optionally system/ with the generating reference system
//
// Read errors carry the path and the 1-based line number of the offending
// line.  ParseError also covers plain I/O failures (unreadable/unwritable
// paths).

std::string format_value(double v);

Mat<double> read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Mat<double>& m);

Signal<double> read_signal(const std::filesystem::path& path);
void write_signal(const std::filesystem::path& path, const Signal<double>& signal);

PhSystem<double> read_system(const std::filesystem::path& dir);
void write_system(const std::filesystem::path& dir, const PhSystem<double>& sys);

struct DatasetMeta {
    double horizon = 0.0;
    double dt = 0.0;
    Index m = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::string generator;
};

struct Dataset {
    Signal<double> u;
    Signal<double> y_data;
    DatasetMeta meta;
    std::optional<PhSystem<double>> reference;
};

Dataset read_dataset(const std::filesystem::path& dir);
void write_dataset(const std::filesystem::path& dir, const Signal<double>& u,
                   const Signal<double>& y_data, const DatasetMeta& meta,
                   const PhSystem<double>* reference);

void write_report_csv(const std::filesystem::path& path, const RunReport<double>& report);
void write_summary_json(const std::filesystem::path& path, const RunReport<double>& report);

}  // namespace phident::io
