#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "qkr/observables.hpp"

namespace qkr {

// Binary grid: 32-byte little-endian header {char magic[4] = "LEWG",
// uint32 kind, uint64 rows, uint64 cols, uint64 reserved = 0} followed by
// rows * cols float64 values in row-major order.
inline constexpr char kGridMagic[4] = {'L', 'E', 'W', 'G'};
inline constexpr std::size_t kGridHeaderBytes = 32;

std::uint32_t grid_kind_code(DistributionKind kind);

void write_grid(const std::filesystem::path& path, const PhaseSpaceDistribution& grid);
// Reads back values, rows, cols and kind; the axis metadata is not stored in
// the file and is left at zero.
PhaseSpaceDistribution read_grid(const std::filesystem::path& path);

struct DistanceRow {
    std::string label;
    std::size_t n = 0;
    double eps = 0.0;
    double distance = 0.0;
};

std::string purity_csv(const PuritySeries& series);
std::string distance_csv(const std::vector<DistanceRow>& rows);

// Writes every run artifact under one directory and records each file with
// its data-row or byte count for the manifest. Thread-safe.
class Emitter {
public:
    explicit Emitter(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }

    std::string write_purity(const std::string& name, const PuritySeries& series);
    std::string write_distances(const std::string& name, const std::vector<DistanceRow>& rows);
    std::string write_grid(const std::string& name, const PhaseSpaceDistribution& grid);
    // Generic CSV: header line plus rows already formatted.
    std::string write_csv(const std::string& name, const std::string& header,
                          const std::vector<std::string>& rows);
    std::string write_json(const std::string& name, const nlohmann::ordered_json& doc);

    nlohmann::ordered_json outputs() const;

private:
    void record(const std::string& name, const std::string& format, std::size_t rows, std::uintmax_t bytes);
    void write_text(const std::string& name, const std::string& text);

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
    nlohmann::ordered_json outputs_ = nlohmann::ordered_json::array();
};

// Shortest round-trip formatting for CSV values.
std::string csv_number(double v);

}  // namespace qkr
