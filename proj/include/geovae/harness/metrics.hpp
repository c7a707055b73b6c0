#pragma once

#include <map>
#include <string>
#include <vector>

namespace geovae::harness {

/// One append-only measurement row. wall_time is volatile and therefore
/// serialized to a separate timings file so metrics.csv stays byte-stable
/// under fixed seeds.
struct MetricsRow {
    std::string model_tag;
    int latent_dim = 0;
    std::string split;
    std::string metric;
    double value = 0.0;
    std::uint64_t seed = 0;
    double wall_time = 0.0;
};

/// Append rows under an exclusive file lock; creates the header on first use.
void append_metrics(const std::string &csv_path, const std::vector<MetricsRow> &rows);

/// Companion wall-time log (same key columns, volatile value).
void append_timings(const std::string &csv_path, const std::vector<MetricsRow> &rows);

std::vector<MetricsRow> read_metrics(const std::string &csv_path, int *skipped = nullptr);

/// Pivot rows into one (model x latent_dim) table per (metric, split) pair.
/// Missing cells render as "-", matching how untrainable configurations are
/// reported.
struct ReportTable {
    std::string metric;
    std::string split;
    std::vector<int> dims;                  ///< sorted columns
    std::vector<std::string> models;        ///< sorted rows
    std::map<std::pair<std::string, int>, double> cells;

    std::string to_markdown() const;
    std::string to_csv() const;
};

std::vector<ReportTable> pivot_metrics(const std::vector<MetricsRow> &rows);

} // namespace geovae::harness
