#include "gridcascade/netmodel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gridcascade/errors.hpp"

namespace gridcascade {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Network

void Network::reindex() {
    bus_lookup_.clear();
    bus_lookup_.reserve(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) bus_lookup_.emplace_back(buses[i].id, i);
    std::sort(bus_lookup_.begin(), bus_lookup_.end());
    for (std::size_t i = 1; i < bus_lookup_.size(); ++i) {
        if (bus_lookup_[i].first == bus_lookup_[i - 1].first)
            throw TopologyError("duplicate bus id " + std::to_string(bus_lookup_[i].first));
    }

    line_lookup_.clear();
    line_lookup_.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) line_lookup_.emplace_back(lines[i].id, i);
    std::sort(line_lookup_.begin(), line_lookup_.end());
    for (std::size_t i = 1; i < line_lookup_.size(); ++i) {
        if (line_lookup_[i].first == line_lookup_[i - 1].first)
            throw TopologyError("duplicate line id " + std::to_string(line_lookup_[i].first));
    }

    line_ends_.clear();
    line_ends_.reserve(lines.size());
    for (const Line& l : lines) line_ends_.emplace_back(bus_index(l.from), bus_index(l.to));

    area_of_.assign(buses.size(), 0);
    if (areas.empty()) {
        area_count_ = 1;
    } else {
        std::vector<char> seen(buses.size(), 0);
        for (std::size_t a = 0; a < areas.size(); ++a) {
            for (int id : areas[a]) {
                const std::size_t b = bus_index(id);
                if (seen[b]) throw TopologyError("bus " + std::to_string(id) + " listed in two areas");
                seen[b] = 1;
                area_of_[b] = a;
            }
        }
        for (std::size_t b = 0; b < buses.size(); ++b) {
            if (!seen[b]) throw TopologyError("bus " + std::to_string(buses[b].id) + " is in no area");
        }
        area_count_ = areas.size();
    }
}

std::size_t Network::bus_index(int id) const {
    auto it = std::lower_bound(bus_lookup_.begin(), bus_lookup_.end(), std::pair<int, std::size_t>{id, 0});
    if (it == bus_lookup_.end() || it->first != id) throw TopologyError("unknown bus id " + std::to_string(id));
    return it->second;
}

std::size_t Network::line_index(int id) const {
    auto it = std::lower_bound(line_lookup_.begin(), line_lookup_.end(), std::pair<int, std::size_t>{id, 0});
    if (it == line_lookup_.end() || it->first != id) throw TopologyError("unknown line id " + std::to_string(id));
    return it->second;
}

std::optional<std::size_t> Network::find_line(int bus_a, int bus_b) const {
    for (std::size_t e = 0; e < lines.size(); ++e) {
        const Line& l = lines[e];
        if ((l.from == bus_a && l.to == bus_b) || (l.from == bus_b && l.to == bus_a)) return e;
    }
    return std::nullopt;
}

std::vector<double> Network::injections() const {
    std::vector<double> p(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) p[i] = buses[i].injection();
    return p;
}

double Network::total_demand() const {
    double total = 0.0;
    for (const Bus& b : buses) total += std::max(0.0, -b.demand);
    return total;
}

void Network::validate(bool require_connected) const {
    if (buses.empty()) throw TopologyError("network has no buses");
    for (const Bus& b : buses) {
        const std::string where = "bus " + std::to_string(b.id);
        if (!(b.d_min <= 0.0 && 0.0 <= b.d_max)) throw std::invalid_argument(where + ": d_min <= 0 <= d_max violated");
        if (b.droop_gain < 0.0) throw std::invalid_argument(where + ": negative droop gain");
        if (b.damping < 0.0) throw std::invalid_argument(where + ": negative damping");
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t e = 0; e < lines.size(); ++e) {
        const Line& l = lines[e];
        const std::string where = "line " + std::to_string(l.id);
        if (l.from == l.to) throw TopologyError(where + ": self loop");
        if (!(l.susceptance > 0.0)) throw std::invalid_argument(where + ": susceptance must be positive");
        if (!(l.capacity > 0.0)) throw std::invalid_argument(where + ": capacity must be positive");
        pairs.emplace_back(std::minmax(from_index(e), to_index(e)));
    }
    std::sort(pairs.begin(), pairs.end());
    if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end())
        throw TopologyError("parallel lines present; merge them first");

    if (require_connected) {
        std::vector<std::size_t> parent(buses.size());
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        std::size_t components = buses.size();
        for (std::size_t e = 0; e < lines.size(); ++e) {
            const std::size_t a = find(from_index(e));
            const std::size_t b = find(to_index(e));
            if (a != b) {
                parent[a] = b;
                --components;
            }
        }
        if (components != 1) throw TopologyError("network is disconnected (" + std::to_string(components) + " islands)");
    }
}

bool operator==(const Bus& a, const Bus& b) {
    return a.id == b.id && a.kind == b.kind && a.demand == b.demand && a.d_min == b.d_min && a.d_max == b.d_max &&
           a.droop_gain == b.droop_gain && a.damping == b.damping && a.inertia == b.inertia && a.gen_p == b.gen_p &&
           a.gen_min == b.gen_min && a.gen_max == b.gen_max && a.cost_a == b.cost_a && a.cost_b == b.cost_b;
}

bool operator==(const Line& a, const Line& b) {
    return a.id == b.id && a.from == b.from && a.to == b.to && a.susceptance == b.susceptance &&
           a.capacity == b.capacity;
}

bool operator==(const Network& a, const Network& b) {
    return a.base_mva == b.base_mva && a.buses == b.buses && a.lines == b.lines && a.areas == b.areas;
}

namespace {

void warn(std::vector<std::string>* warnings, std::string message) {
    if (warnings != nullptr) {
        warnings->push_back(std::move(message));
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

/// Merge parallel lines in place, keeping the first line's id and orientation.
void merge_parallel_lines(Network& net, std::vector<std::string>* warnings) {
    std::map<std::pair<int, int>, std::size_t> first;
    std::vector<Line> kept;
    kept.reserve(net.lines.size());
    for (const Line& l : net.lines) {
        const auto key = std::minmax(l.from, l.to);
        auto it = first.find(key);
        if (it == first.end()) {
            first.emplace(key, kept.size());
            kept.push_back(l);
            continue;
        }
        Line& k = kept[it->second];
        k.susceptance += l.susceptance;
        k.capacity += l.capacity;
        warn(warnings, "parallel branch " + std::to_string(l.from) + "-" + std::to_string(l.to) + " (line " +
                           std::to_string(l.id) + ") merged into line " + std::to_string(k.id));
    }
    net.lines = std::move(kept);
}

void finish(Network& net, std::vector<std::string>* warnings) {
    merge_parallel_lines(net, warnings);
    net.reindex();
    net.validate(true);
}

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t offset) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

// ---------------------------------------------------------------------------
// native JSON

double json_number(const json& j, const char* key, double fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<double>();
}

Network from_json(const json& doc) {
    Network net;
    net.base_mva = json_number(doc, "base_mva", 100.0);
    for (const json& jb : doc.at("buses")) {
        Bus b;
        b.id = jb.at("id").get<int>();
        const std::string kind = jb.value("kind", std::string("load"));
        if (kind == "generator") {
            b.kind = BusKind::generator;
        } else if (kind == "load") {
            b.kind = BusKind::load;
        } else {
            throw std::invalid_argument("bus " + std::to_string(b.id) + ": unknown kind '" + kind + "'");
        }
        b.demand = json_number(jb, "demand", 0.0);
        b.d_min = json_number(jb, "d_min", 0.0);
        b.d_max = json_number(jb, "d_max", 0.0);
        b.droop_gain = json_number(jb, "droop_K", 0.0);
        b.damping = json_number(jb, "damping_D", 0.0);
        if (jb.contains("inertia_M") && !jb["inertia_M"].is_null()) b.inertia = jb["inertia_M"].get<double>();
        b.gen_p = json_number(jb, "gen_p", 0.0);
        b.gen_min = json_number(jb, "gen_min", 0.0);
        b.gen_max = json_number(jb, "gen_max", 0.0);
        b.cost_a = json_number(jb, "cost_a", 0.0);
        b.cost_b = json_number(jb, "cost_b", 0.0);
        net.buses.push_back(b);
    }
    for (const json& jl : doc.at("lines")) {
        Line l;
        l.id = jl.at("id").get<int>();
        l.from = jl.at("from").get<int>();
        l.to = jl.at("to").get<int>();
        l.susceptance = json_number(jl, "susceptance", 1.0);
        l.capacity = json_number(jl, "capacity", kInf);
        net.lines.push_back(l);
    }
    if (doc.contains("areas")) net.areas = doc["areas"].get<std::vector<std::vector<int>>>();
    return net;
}

// ---------------------------------------------------------------------------
// matpower subset

struct MatrixText {
    std::vector<std::vector<double>> rows;
};

class MatpowerReader {
public:
    explicit MatpowerReader(std::string_view text) : text_(text) {}

    double scalar(std::string_view name) {
        const std::size_t at = find_assignment(name);
        if (at == std::string_view::npos) fail("missing mpc." + std::string(name), text_.size());
        std::size_t pos = at;
        skip_space(pos);
        return number(pos);
    }

    std::optional<MatrixText> matrix(std::string_view name) {
        const std::size_t at = find_assignment(name);
        if (at == std::string_view::npos) return std::nullopt;
        std::size_t pos = at;
        skip_space(pos);
        if (pos >= text_.size() || text_[pos] != '[') fail("expected '[' after mpc." + std::string(name), pos);
        ++pos;
        MatrixText m;
        std::vector<double> row;
        while (true) {
            if (pos >= text_.size()) fail("unterminated matrix mpc." + std::string(name), pos);
            const char c = text_[pos];
            if (c == '%') {
                while (pos < text_.size() && text_[pos] != '\n') ++pos;
            } else if (c == ']') {
                ++pos;
                break;
            } else if (c == ';' || c == '\n') {
                if (!row.empty()) m.rows.push_back(std::move(row));
                row.clear();
                ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
                ++pos;
            } else if (c == '.' && pos + 2 < text_.size() && text_.substr(pos, 3) == "...") {
                pos += 3;
                while (pos < text_.size() && text_[pos] != '\n') ++pos;
                ++pos;
            } else {
                row.push_back(number(pos));
            }
        }
        if (!row.empty()) m.rows.push_back(std::move(row));
        return m;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t offset) const {
        const auto [line, col] = line_col(text_, offset);
        throw ParseError(what, line, col);
    }

private:
    std::size_t find_assignment(std::string_view name) const {
        const std::string key = "mpc." + std::string(name);
        std::size_t pos = 0;
        while ((pos = text_.find(key, pos)) != std::string_view::npos) {
            // skip commented-out occurrences
            const std::size_t line_start = text_.rfind('\n', pos);
            const std::size_t from = line_start == std::string_view::npos ? 0 : line_start + 1;
            const bool commented = text_.substr(from, pos - from).find('%') != std::string_view::npos;
            std::size_t after = pos + key.size();
            const bool whole_word = after < text_.size() && !(std::isalnum(static_cast<unsigned char>(text_[after])) ||
                                                             text_[after] == '_');
            if (!commented && whole_word) {
                std::size_t q = after;
                while (q < text_.size() && (text_[q] == ' ' || text_[q] == '\t')) ++q;
                if (q < text_.size() && text_[q] == '=') return q + 1;
            }
            pos = after;
        }
        return std::string_view::npos;
    }

    void skip_space(std::size_t& pos) const {
        while (pos < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos]))) ++pos;
    }

    double number(std::size_t& pos) const {
        std::size_t end = pos;
        while (end < text_.size()) {
            const char c = text_[end];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == 'e' ||
                c == 'E' || std::isalpha(static_cast<unsigned char>(c))) {
                ++end;
            } else {
                break;
            }
        }
        std::string token(text_.substr(pos, end - pos));
        if (token == "Inf" || token == "inf") {
            pos = end;
            return kInf;
        }
        if (token == "-Inf" || token == "-inf") {
            pos = end;
            return -kInf;
        }
        double value = 0.0;
        const char* first = token.data();
        const char* last = token.data() + token.size();
        if (!token.empty() && *first == '+') ++first;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (token.empty() || ec != std::errc() || ptr != last) fail("invalid number '" + token + "'", pos);
        pos = end;
        return value;
    }

    std::string_view text_;
};

Network from_matpower(std::string_view text, std::vector<std::string>* warnings) {
    MatpowerReader reader(text);
    Network net;
    net.base_mva = reader.scalar("baseMVA");
    const double base = net.base_mva;
    auto bus = reader.matrix("bus");
    auto gen = reader.matrix("gen");
    auto branch = reader.matrix("branch");
    auto gencost = reader.matrix("gencost");
    if (!bus) reader.fail("missing mpc.bus", text.size());
    if (!branch) reader.fail("missing mpc.branch", text.size());

    std::map<int, std::vector<int>> area_members;
    std::vector<int> isolated;
    for (const auto& row : bus->rows) {
        if (row.size() < 7) reader.fail("mpc.bus row needs at least 7 columns", 0);
        const int type = static_cast<int>(row[1]);
        Bus b;
        b.id = static_cast<int>(row[0]);
        if (type == 4) {
            isolated.push_back(b.id);
            continue;
        }
        b.demand = -row[2] / base;
        net.buses.push_back(b);
        area_members[static_cast<int>(row[6])].push_back(b.id);
    }
    net.reindex();

    if (gen) {
        for (std::size_t g = 0; g < gen->rows.size(); ++g) {
            const auto& row = gen->rows[g];
            if (row.size() < 10) reader.fail("mpc.gen row needs at least 10 columns", 0);
            if (row[7] <= 0.0) continue;
            const int id = static_cast<int>(row[0]);
            if (std::find(isolated.begin(), isolated.end(), id) != isolated.end()) continue;
            Bus& b = net.buses[net.bus_index(id)];
            double a = 0.0;
            double lin = 0.0;
            if (gencost && g < gencost->rows.size()) {
                const auto& c = gencost->rows[g];
                if (c.size() >= 4 && static_cast<int>(c[0]) == 2) {
                    const int n = static_cast<int>(c[3]);
                    const std::size_t first = 4;
                    if (n >= 3 && c.size() >= first + static_cast<std::size_t>(n)) {
                        a = 2.0 * c[first + static_cast<std::size_t>(n) - 3] * base * base;
                        lin = c[first + static_cast<std::size_t>(n) - 2] * base;
                    } else if (n == 2 && c.size() >= first + 2) {
                        lin = c[first] * base;
                    }
                }
            }
            const bool first_gen = b.kind != BusKind::generator;
            b.kind = BusKind::generator;
            b.gen_p += row[1] / base;
            b.gen_max += row[8] / base;
            b.gen_min += row[9] / base;
            if (first_gen) {
                b.cost_a = a;
                b.cost_b = lin;
            } else {
                // Combine as units sharing the bus output at equal marginal cost.
                if (a > 0.0 && b.cost_a > 0.0) {
                    b.cost_a = 1.0 / (1.0 / a + 1.0 / b.cost_a);
                } else {
                    b.cost_a = std::max(a, b.cost_a);
                }
                b.cost_b = std::min(b.cost_b, lin);
                warn(warnings, "bus " + std::to_string(id) + ": multiple generators aggregated");
            }
        }
    }
    for (Bus& b : net.buses) {
        if (b.kind != BusKind::generator) continue;
        b.gen_p = std::clamp(b.gen_p, b.gen_min, b.gen_max);
        b.d_min = b.gen_p - b.gen_max;
        b.d_max = b.gen_p - b.gen_min;
        b.droop_gain = b.gen_max;
    }
    const bool has_costs = gencost.has_value();
    if (!has_costs) {
        for (Bus& b : net.buses) {
            if (b.kind == BusKind::generator) b.cost_a = 2.0;
        }
    }

    int next_id = 1;
    for (const auto& row : branch->rows) {
        if (row.size() < 11) reader.fail("mpc.branch row needs at least 11 columns", 0);
        const int id = next_id++;
        if (row[10] <= 0.0) continue;
        const int f = static_cast<int>(row[0]);
        const int t = static_cast<int>(row[1]);
        if (std::find(isolated.begin(), isolated.end(), f) != isolated.end() ||
            std::find(isolated.begin(), isolated.end(), t) != isolated.end())
            continue;
        Line l;
        l.id = id;
        l.from = f;
        l.to = t;
        const double x = row[3];
        if (x == 0.0) reader.fail("branch " + std::to_string(f) + "-" + std::to_string(t) + " has zero reactance", 0);
        l.susceptance = 1.0 / std::abs(x);
        l.capacity = row[5] > 0.0 ? row[5] / base : kInf;
        net.lines.push_back(l);
    }

    if (area_members.size() > 1) {
        for (auto& [area, members] : area_members) net.areas.push_back(std::move(members));
    }
    return net;
}

}  // namespace

Network parse_case(std::string_view text, CaseFormat format, std::vector<std::string>* warnings) {
    Network net;
    if (format == CaseFormat::native_json) {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
            throw ParseError(std::string("invalid JSON: ") + e.what(), line, col);
        }
        try {
            net = from_json(doc);
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad case document: ") + e.what(), 1, 1);
        }
    } else {
        net = from_matpower(text, warnings);
    }
    finish(net, warnings);
    return net;
}

Network load_case(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open case file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const bool matpower = path.size() > 2 && path.substr(path.size() - 2) == ".m";
    return parse_case(ss.str(), matpower ? CaseFormat::matpower : CaseFormat::native_json, warnings);
}

std::string serialize_case(const Network& network) {
    json doc;
    doc["base_mva"] = network.base_mva;
    json buses = json::array();
    for (const Bus& b : network.buses) {
        json jb;
        jb["id"] = b.id;
        jb["kind"] = b.kind == BusKind::generator ? "generator" : "load";
        jb["demand"] = b.demand;
        jb["d_min"] = b.d_min;
        jb["d_max"] = b.d_max;
        jb["droop_K"] = b.droop_gain;
        jb["damping_D"] = b.damping;
        if (b.inertia) jb["inertia_M"] = *b.inertia;
        if (b.kind == BusKind::generator) {
            jb["gen_p"] = b.gen_p;
            jb["gen_min"] = b.gen_min;
            jb["gen_max"] = b.gen_max;
            jb["cost_a"] = b.cost_a;
            jb["cost_b"] = b.cost_b;
        }
        buses.push_back(std::move(jb));
    }
    doc["buses"] = std::move(buses);
    json lines = json::array();
    for (const Line& l : network.lines) {
        json jl;
        jl["id"] = l.id;
        jl["from"] = l.from;
        jl["to"] = l.to;
        jl["susceptance"] = l.susceptance;
        if (std::isfinite(l.capacity)) {
            jl["capacity"] = l.capacity;
        } else {
            jl["capacity"] = nullptr;
        }
        lines.push_back(std::move(jl));
    }
    doc["lines"] = std::move(lines);
    doc["areas"] = network.areas;
    return doc.dump(2);
}

std::vector<double> perturb_loads(const Network& network, std::span<const double> base, double magnitude,
                                  std::uint64_t seed) {
    if (base.size() != network.bus_count()) throw std::invalid_argument("perturb_loads: size mismatch");
    if (!(magnitude >= 0.0 && magnitude < 1.0)) throw std::invalid_argument("perturb_loads: magnitude outside [0, 1)");
    SeededUniform rng(seed);
    std::vector<double> out(base.begin(), base.end());
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double u = rng.next(-magnitude, magnitude);
        if (network.buses[j].kind == BusKind::load) out[j] = base[j] * (1.0 + u);
    }
    return out;
}

Network scale_capacities(const Network& network, double alpha_line, double alpha_gen) {
    if (!(alpha_line > 0.0 && alpha_line <= 1.0) || !(alpha_gen > 0.0 && alpha_gen <= 1.0))
        throw std::invalid_argument("scale_capacities: alpha outside (0, 1]");
    Network out = network;
    for (Line& l : out.lines) l.capacity *= alpha_line;
    for (Bus& b : out.buses) {
        if (b.kind != BusKind::generator) continue;
        b.d_max *= alpha_gen;
        b.d_min *= alpha_gen;
        b.gen_max *= alpha_gen;
        b.gen_min *= alpha_gen;
    }
    return out;
}

Network switch_off(const Network& network, std::span<const std::pair<int, int>> pairs) {
    std::vector<char> drop(network.line_count(), 0);
    for (const auto& [a, b] : pairs) {
        auto e = network.find_line(a, b);
        if (!e) throw TopologyError("no line between buses " + std::to_string(a) + " and " + std::to_string(b));
        drop[*e] = 1;
    }
    Network out = network;
    out.lines.clear();
    for (std::size_t e = 0; e < network.line_count(); ++e) {
        if (!drop[e]) out.lines.push_back(network.lines[e]);
    }
    out.reindex();
    return out;
}

std::vector<std::pair<int, int>> parse_line_pairs(std::string_view text) {
    std::vector<std::pair<int, int>> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string_view item = text.substr(pos, comma - pos);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
        if (!item.empty()) {
            const std::size_t dash = item.find('-', 1);
            if (dash == std::string_view::npos) throw std::invalid_argument("line pair '" + std::string(item) + "' is not i-j");
            int a = 0;
            int b = 0;
            auto r1 = std::from_chars(item.data(), item.data() + dash, a);
            auto r2 = std::from_chars(item.data() + dash + 1, item.data() + item.size(), b);
            if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != item.data() + dash ||
                r2.ptr != item.data() + item.size())
                throw std::invalid_argument("line pair '" + std::string(item) + "' is not i-j");
            out.emplace_back(a, b);
        }
        pos = comma + 1;
    }
    return out;
}

}  // namespace gridcascade
