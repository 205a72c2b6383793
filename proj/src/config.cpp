#include "qkr/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qkr/errors.hpp"

namespace qkr {

namespace {

constexpr std::array<std::pair<ExperimentKind, const char*>, 6> kKindNames{{
    {ExperimentKind::PuritySweep, "purity-sweep"},
    {ExperimentKind::LyapunovCollapse, "lyapunov-collapse"},
    {ExperimentKind::WignerCompare, "wigner-compare"},
    {ExperimentKind::EnvDecoherence, "env-decoherence"},
    {ExperimentKind::GammaEstimate, "gamma-estimate"},
    {ExperimentKind::LyapunovEstimate, "lyapunov-estimate"},
}};

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys{
        "experiment.kind",       "experiment.seed",         "experiment.n_kicks",
        "experiment.n_initial_states", "experiment.output_dir", "experiment.threads",
        "system.N1",             "system.N2",               "system.K1",
        "system.K2",             "system.eps",              "system.coupling_offset",
        "system.x_offset",       "system.p_offset",         "system.sigma",
        "lyapunov.samples",      "lyapunov.steps",          "correlator.pairs",
        "correlator.onset_pairs", "correlator.max_lag",     "wigner.sizes",
        "wigner.resolution",     "wigner.classical_points", "wigner.x0",
        "wigner.p0",             "wigner.partner_x0",       "wigner.partner_p0",
        "env.n_env_states",      "resources.memory_budget_mb",
    };
    return keys;
}

struct Entry {
    std::string value;
    std::string where;  // "line 7" or "--set"
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

void store(std::map<std::string, Entry>& entries, const std::string& key, const std::string& value,
           const std::string& where, bool allow_replace) {
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ConfigError(where + ": unknown key '" + key + "'");
    if (!allow_replace && entries.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    entries[key] = {value, where};
}

class Reader {
public:
    explicit Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    void require(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing mandatory key '" + key + "'");
    }

    template <class T>
    void number(const std::string& key, T& out) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return;
        out = parse_number<T>(it->second.value, key, it->second.where);
    }

    template <class T>
    void list(const std::string& key, std::vector<T>& out) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return;
        out.clear();
        std::stringstream ss(it->second.value);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(trim(item), key, it->second.where));
        if (out.empty()) throw ConfigError(it->second.where + ": empty list for '" + key + "'");
    }

    void text(const std::string& key, std::string& out) const {
        auto it = entries_.find(key);
        if (it != entries_.end()) out = it->second.value;
    }

    const Entry& entry(const std::string& key) const { return entries_.at(key); }

private:
    template <class T>
    static T parse_number(const std::string& s, const std::string& key, const std::string& where) {
        T v{};
        const char* end = s.data() + s.size();
        auto [ptr, ec] = std::from_chars(s.data(), end, v);
        if (s.empty() || ec != std::errc() || ptr != end)
            throw ConfigError(where + ": malformed number '" + s + "' for '" + key + "'");
        if constexpr (std::is_floating_point_v<T>)
            if (!std::isfinite(v)) throw ConfigError(where + ": non-finite value for '" + key + "'");
        return v;
    }

    std::map<std::string, Entry> entries_;
};

void check(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

void validate(const ExperimentConfig& c) {
    check(c.n_kicks >= 1, "experiment.n_kicks must be >= 1");
    check(c.n_initial_states >= 1, "experiment.n_initial_states must be >= 1");
    check(c.threads >= 0, "experiment.threads must be >= 0");
    check(!c.output_dir.empty(), "experiment.output_dir must not be empty");
    for (std::size_t n : {c.n1, c.size2()}) check(n >= 2 && n % 2 == 0, "system.N1/N2 must be even and >= 2");
    check(!c.k1.empty(), "system.K1 needs at least one value");
    for (double k : c.k1) check(k >= 0.0, "system.K1 values must be >= 0");
    for (double k : c.k2) check(k >= 0.0, "system.K2 values must be >= 0");
    check(c.k2.size() <= 1 || c.k2.size() == c.k1.size(), "system.K2 must hold one value or one per K1 value");
    for (double e : c.eps) check(e >= 0.0, "system.eps values must be >= 0");
    for (double o : {c.x_offset, c.p_offset}) check(o >= 0.0 && o < 1.0, "grid offsets must lie in [0, 1)");
    check(c.sigma.symmetric || c.sigma.value > 0.0, "system.sigma must be 'symmetric' or positive");
    check(c.lyapunov_samples >= 1 && c.lyapunov_steps >= 1, "lyapunov samples and steps must be >= 1");
    check(c.correlator_pairs >= 1 && c.onset_pairs >= 1, "correlator pair counts must be >= 1");
    check(c.correlator_max_lag >= 0, "correlator.max_lag must be >= 0");
    check(!c.sizes.empty(), "wigner.sizes needs at least one value");
    for (std::size_t n : c.sizes) check(n >= 2 && n % 2 == 0, "wigner.sizes must be even and >= 2");
    check(c.resolution >= 16, "wigner.resolution must be >= 16");
    check(c.classical_points >= 1, "wigner.classical_points must be >= 1");
    check(c.n_env_states >= 1, "env.n_env_states must be >= 1");
    check(c.memory_budget_mb > 0.0, "resources.memory_budget_mb must be positive");
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        if constexpr (std::is_floating_point_v<T>)
            out += format_double(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    for (const auto& [k, name] : kKindNames)
        if (k == kind) return name;
    return "unknown";
}

ExperimentKind parse_kind(const std::string& text) {
    for (const auto& [k, name] : kKindNames)
        if (text == name) return k;
    throw ConfigError("unknown experiment kind '" + text + "'");
}

double ExperimentConfig::kick2(std::size_t i) const {
    if (k2.empty()) return k1.at(i);
    if (k2.size() == 1) return k2[0];
    return k2.at(i);
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                              std::optional<ExperimentKind> expected) {
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string raw, section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string where = "line " + std::to_string(line_no);
        std::string line = raw.substr(0, raw.find('#'));
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
        if (section.empty()) throw ConfigError(where + ": key outside of a [section]");
        store(entries, section + "." + trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where, false);
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("--set " + o + ": expected section.key=value");
        store(entries, trim(o.substr(0, eq)), trim(o.substr(eq + 1)), "--set " + o, true);
    }

    const Reader r(std::move(entries));
    ExperimentConfig c;
    if (expected && !r.has("experiment.kind")) {
        c.kind = *expected;
    } else {
        r.require("experiment.kind");
        c.kind = parse_kind(r.entry("experiment.kind").value);
        if (expected && c.kind != *expected)
            throw ConfigError(r.entry("experiment.kind").where + ": experiment kind '" + to_string(c.kind) +
                              "' does not match the requested '" + to_string(*expected) + "'");
    }
    r.require("experiment.seed");
    r.require("system.K1");
    if (c.kind != ExperimentKind::LyapunovEstimate) {
        r.require("system.N1");
        r.require("system.eps");
    }

    r.number("experiment.seed", c.seed);
    r.number("experiment.n_kicks", c.n_kicks);
    r.number("experiment.n_initial_states", c.n_initial_states);
    r.text("experiment.output_dir", c.output_dir);
    r.number("experiment.threads", c.threads);

    r.number("system.N1", c.n1);
    r.number("system.N2", c.n2);
    r.list("system.K1", c.k1);
    r.list("system.K2", c.k2);
    r.list("system.eps", c.eps);
    r.number("system.coupling_offset", c.coupling_offset);
    r.number("system.x_offset", c.x_offset);
    r.number("system.p_offset", c.p_offset);
    if (r.has("system.sigma")) {
        const auto& e = r.entry("system.sigma");
        if (e.value == "symmetric") {
            c.sigma = {};
        } else {
            c.sigma.symmetric = false;
            r.number("system.sigma", c.sigma.value);
        }
    }

    r.number("lyapunov.samples", c.lyapunov_samples);
    r.number("lyapunov.steps", c.lyapunov_steps);
    r.number("correlator.pairs", c.correlator_pairs);
    r.number("correlator.onset_pairs", c.onset_pairs);
    r.number("correlator.max_lag", c.correlator_max_lag);
    r.list("wigner.sizes", c.sizes);
    r.number("wigner.resolution", c.resolution);
    r.number("wigner.classical_points", c.classical_points);
    r.number("wigner.x0", c.x0);
    r.number("wigner.p0", c.p0);
    r.number("wigner.partner_x0", c.partner_x0);
    r.number("wigner.partner_p0", c.partner_p0);
    r.number("env.n_env_states", c.n_env_states);
    r.number("resources.memory_budget_mb", c.memory_budget_mb);
    if (c.n2 == c.n1) c.n2 = 0;

    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                             std::optional<ExperimentKind> expected) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), overrides, expected);
}

std::string config_text(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "[experiment]\n"
      << "kind = " << to_string(c.kind) << "\n"
      << "seed = " << c.seed << "\n"
      << "n_kicks = " << c.n_kicks << "\n"
      << "n_initial_states = " << c.n_initial_states << "\n"
      << "output_dir = " << c.output_dir << "\n"
      << "threads = " << c.threads << "\n\n";
    o << "[system]\n"
      << "N1 = " << c.n1 << "\n";
    if (c.n2 != 0) o << "N2 = " << c.n2 << "\n";
    o << "K1 = " << join(c.k1) << "\n";
    if (!c.k2.empty()) o << "K2 = " << join(c.k2) << "\n";
    if (!c.eps.empty()) o << "eps = " << join(c.eps) << "\n";
    o << "coupling_offset = " << format_double(c.coupling_offset) << "\n"
      << "x_offset = " << format_double(c.x_offset) << "\n"
      << "p_offset = " << format_double(c.p_offset) << "\n"
      << "sigma = " << (c.sigma.symmetric ? std::string("symmetric") : format_double(c.sigma.value)) << "\n\n";
    o << "[lyapunov]\n"
      << "samples = " << c.lyapunov_samples << "\n"
      << "steps = " << c.lyapunov_steps << "\n\n";
    o << "[correlator]\n"
      << "pairs = " << c.correlator_pairs << "\n"
      << "onset_pairs = " << c.onset_pairs << "\n"
      << "max_lag = " << c.correlator_max_lag << "\n\n";
    o << "[wigner]\n"
      << "sizes = " << join(c.sizes) << "\n"
      << "resolution = " << c.resolution << "\n"
      << "classical_points = " << c.classical_points << "\n"
      << "x0 = " << format_double(c.x0) << "\n"
      << "p0 = " << format_double(c.p0) << "\n"
      << "partner_x0 = " << format_double(c.partner_x0) << "\n"
      << "partner_p0 = " << format_double(c.partner_p0) << "\n\n";
    o << "[env]\n"
      << "n_env_states = " << c.n_env_states << "\n\n";
    o << "[resources]\n"
      << "memory_budget_mb = " << format_double(c.memory_budget_mb) << "\n";
    return o.str();
}

}  // namespace qkr
