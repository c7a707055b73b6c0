#include "geovae/harness/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fcntl.h>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/file.h>
#include <unistd.h>

namespace geovae::harness {

namespace {

constexpr const char *metrics_header = "model,latent_dim,split,metric,value,seed\n";

std::string format_value(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void append_locked(const std::string &path, const std::string &header,
                   const std::string &payload)
{
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0)
        throw std::runtime_error("metrics: cannot open " + path);
    ::flock(fd, LOCK_EX);
    // write the header only when the file is empty (checked under the lock)
    const off_t size = ::lseek(fd, 0, SEEK_END);
    std::string out;
    if (size == 0)
        out = header;
    out += payload;
    const auto written = ::write(fd, out.data(), out.size());
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (written != static_cast<ssize_t>(out.size()))
        throw std::runtime_error("metrics: short write to " + path);
}

} // namespace

void append_metrics(const std::string &csv_path, const std::vector<MetricsRow> &rows)
{
    std::string payload;
    for (const auto &r : rows)
        payload += r.model_tag + "," + std::to_string(r.latent_dim) + "," + r.split + ","
            + r.metric + "," + format_value(r.value) + "," + std::to_string(r.seed) + "\n";
    append_locked(csv_path, metrics_header, payload);
}

void append_timings(const std::string &csv_path, const std::vector<MetricsRow> &rows)
{
    std::string payload;
    for (const auto &r : rows)
        payload += r.model_tag + "," + std::to_string(r.latent_dim) + "," + r.split + ","
            + r.metric + "," + format_value(r.wall_time) + "," + std::to_string(r.seed) + "\n";
    append_locked(csv_path, "model,latent_dim,split,metric,wall_time_s,seed\n", payload);
}

std::vector<MetricsRow> read_metrics(const std::string &csv_path, int *skipped)
{
    std::ifstream f(csv_path);
    if (!f)
        throw std::runtime_error("metrics: cannot open " + csv_path);
    std::vector<MetricsRow> rows;
    int bad = 0;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        if (first && line.rfind("model,", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        std::istringstream ss(line);
        MetricsRow r;
        std::string dim_s, value_s, seed_s;
        if (!std::getline(ss, r.model_tag, ',') || !std::getline(ss, dim_s, ',')
            || !std::getline(ss, r.split, ',') || !std::getline(ss, r.metric, ',')
            || !std::getline(ss, value_s, ',') || !std::getline(ss, seed_s)) {
            ++bad;
            continue;
        }
        try {
            r.latent_dim = std::stoi(dim_s);
            r.value = std::stod(value_s);
            r.seed = std::stoull(seed_s);
        } catch (const std::exception &) {
            ++bad;
            continue;
        }
        rows.push_back(std::move(r));
    }
    if (skipped)
        *skipped = bad;
    return rows;
}

std::vector<ReportTable> pivot_metrics(const std::vector<MetricsRow> &rows)
{
    std::map<std::pair<std::string, std::string>, ReportTable> tables;
    for (const auto &r : rows) {
        auto &t = tables[{ r.metric, r.split }];
        t.metric = r.metric;
        t.split = r.split;
        t.cells[{ r.model_tag, r.latent_dim }] = r.value; // later rows win
    }
    std::vector<ReportTable> out;
    for (auto &[key, t] : tables) {
        std::set<int> dims;
        std::set<std::string> models;
        for (const auto &[cell, v] : t.cells) {
            models.insert(cell.first);
            dims.insert(cell.second);
        }
        t.dims.assign(dims.begin(), dims.end());
        t.models.assign(models.begin(), models.end());
        out.push_back(std::move(t));
    }
    return out;
}

std::string ReportTable::to_markdown() const
{
    std::ostringstream os;
    os << "### " << metric << " (" << split << ")\n\n";
    os << "| model |";
    for (int d : dims)
        os << " m=" << d << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < dims.size(); ++i)
        os << "---|";
    os << "\n";
    for (const auto &model : models) {
        os << "| " << model << " |";
        for (int d : dims) {
            const auto it = cells.find({ model, d });
            if (it == cells.end())
                os << " - |";
            else
                os << " " << format_value(it->second) << " |";
        }
        os << "\n";
    }
    return os.str();
}

std::string ReportTable::to_csv() const
{
    std::ostringstream os;
    os << "metric," << metric << ",split," << split << "\n";
    os << "model";
    for (int d : dims)
        os << ",m" << d;
    os << "\n";
    for (const auto &model : models) {
        os << model;
        for (int d : dims) {
            const auto it = cells.find({ model, d });
            os << ',' << (it == cells.end() ? std::string("-") : format_value(it->second));
        }
        os << "\n";
    }
    return os.str();
}

} // namespace geovae::harness
