#include "qkr/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "qkr/config.hpp"
#include "qkr/errors.hpp"

namespace qkr {

namespace fs = std::filesystem;

std::uint32_t grid_kind_code(DistributionKind kind) {
    switch (kind) {
        case DistributionKind::Wigner: return 0;
        case DistributionKind::Husimi: return 1;
        case DistributionKind::Classical: return 2;
    }
    return 0;
}

namespace {

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void write_grid(const fs::path& path, const PhaseSpaceDistribution& grid) {
    if (grid.values.size() != grid.rows * grid.cols) throw ContractViolation("grid shape does not match its values");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(kGridMagic, 4);
    put<std::uint32_t>(out, grid_kind_code(grid.kind));
    put<std::uint64_t>(out, grid.rows);
    put<std::uint64_t>(out, grid.cols);
    put<std::uint64_t>(out, 0);
    out.write(reinterpret_cast<const char*>(grid.values.data()), std::streamsize(grid.values.size() * sizeof(double)));
    if (!out) throw Error("short write to " + path.string());
}

PhaseSpaceDistribution read_grid(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kGridMagic, 4) != 0) throw Error(path.string() + ": not a LEWG grid file");
    const auto kind = get<std::uint32_t>(in);
    PhaseSpaceDistribution g;
    if (kind > 2) throw Error(path.string() + ": unknown grid kind " + std::to_string(kind));
    g.kind = kind == 0 ? DistributionKind::Wigner : kind == 1 ? DistributionKind::Husimi : DistributionKind::Classical;
    g.rows = get<std::uint64_t>(in);
    g.cols = get<std::uint64_t>(in);
    get<std::uint64_t>(in);
    g.values.resize(g.rows * g.cols);
    in.read(reinterpret_cast<char*>(g.values.data()), std::streamsize(g.values.size() * sizeof(double)));
    if (!in) throw Error(path.string() + ": truncated grid data");
    return g;
}

std::string csv_number(double v) { return format_double(v); }

std::string purity_csv(const PuritySeries& s) {
    std::ostringstream o;
    o << "t,P,P_stderr\n";
    for (std::size_t i = 0; i < s.times.size(); ++i)
        o << s.times[i] << ',' << csv_number(s.values[i]) << ','
          << csv_number(i < s.stderr_.size() ? s.stderr_[i] : 0.0) << '\n';
    return o.str();
}

std::string distance_csv(const std::vector<DistanceRow>& rows) {
    std::ostringstream o;
    o << "label,N,eps,distance\n";
    for (const auto& r : rows) o << r.label << ',' << r.n << ',' << csv_number(r.eps) << ',' << csv_number(r.distance) << '\n';
    return o.str();
}

Emitter::Emitter(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void Emitter::record(const std::string& name, const std::string& format, std::size_t rows, std::uintmax_t bytes) {
    std::lock_guard lock(mutex_);
    outputs_.push_back({{"path", name}, {"format", format}, {"rows", rows}, {"bytes", bytes}});
}

void Emitter::write_text(const std::string& name, const std::string& text) {
    std::lock_guard lock(mutex_);
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    out << text;
    if (!out) throw Error("short write to " + (dir_ / name).string());
}

std::string Emitter::write_purity(const std::string& name, const PuritySeries& series) {
    const auto text = purity_csv(series);
    write_text(name, text);
    record(name, "csv:t,P,P_stderr", series.times.size(), text.size());
    return name;
}

std::string Emitter::write_distances(const std::string& name, const std::vector<DistanceRow>& rows) {
    const auto text = distance_csv(rows);
    write_text(name, text);
    record(name, "csv:label,N,eps,distance", rows.size(), text.size());
    return name;
}

std::string Emitter::write_grid(const std::string& name, const PhaseSpaceDistribution& grid) {
    {
        std::lock_guard lock(mutex_);
        qkr::write_grid(dir_ / name, grid);
    }
    record(name, "grid:" + to_string(grid.kind), grid.rows, kGridHeaderBytes + 8 * grid.rows * grid.cols);
    return name;
}

std::string Emitter::write_csv(const std::string& name, const std::string& header, const std::vector<std::string>& rows) {
    std::string text = header + "\n";
    for (const auto& r : rows) text += r + "\n";
    write_text(name, text);
    record(name, "csv:" + header, rows.size(), text.size());
    return name;
}

std::string Emitter::write_json(const std::string& name, const nlohmann::ordered_json& doc) {
    const auto text = doc.dump(2) + "\n";
    write_text(name, text);
    record(name, "json", 0, text.size());
    return name;
}

nlohmann::ordered_json Emitter::outputs() const {
    std::lock_guard lock(mutex_);
    return outputs_;
}

}  // namespace qkr
