#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gridcascade/powerflow.hpp"
#include "gridcascade/verify.hpp"

namespace gridcascade::verify {

namespace {

void add_line(Network& net, std::set<std::pair<std::size_t, std::size_t>>& used, std::size_t a, std::size_t b,
              SeededUniform& rng) {
    const auto key = std::minmax(a, b);
    if (a == b || !used.insert(key).second) return;
    Line l;
    l.id = static_cast<int>(net.lines.size()) + 1;
    l.from = net.buses[a].id;
    l.to = net.buses[b].id;
    l.susceptance = rng.next(0.5, 2.0);
    net.lines.push_back(l);
}

void make_generator(Bus& b, SeededUniform& rng) {
    b.kind = BusKind::generator;
    b.gen_max = rng.next(1.0, 3.0);
    b.gen_p = rng.next(0.3, 0.7) * b.gen_max;
    b.gen_min = 0.0;
    b.droop_gain = b.gen_max;
    b.d_min = b.gen_p - b.gen_max;
    b.d_max = b.gen_p - b.gen_min;
    b.cost_a = rng.next(0.5, 2.0);
}

// Loads drawn at random and scaled to match the generation.
void balance_loads(Network& net, SeededUniform& rng) {
    double gen = 0.0;
    double load = 0.0;
    for (Bus& b : net.buses) {
        if (b.has_generator()) {
            gen += b.gen_p;
        } else {
            b.demand = -rng.next(0.3, 1.2);
            load -= b.demand;
        }
    }
    if (load == 0.0) {
        // all generators: turn the surplus into a demand at each bus
        for (Bus& b : net.buses) b.demand = -b.gen_p;
        return;
    }
    for (Bus& b : net.buses) {
        if (!b.has_generator()) b.demand *= gen / load;
    }
}

void rate_lines(Network& net, std::span<const double> injections, SeededUniform& rng, double lo, double hi,
                double floor) {
    net.reindex();
    const std::vector<double> f = dc_power_flow(net, injections).flows;
    for (std::size_t e = 0; e < net.line_count(); ++e) {
        net.lines[e].capacity = std::max(std::abs(f[e]) * rng.next(lo, hi), floor);
    }
}

}  // namespace

PartitionedInstance random_tree_partitioned(SeededUniform& rng, std::size_t max_buses, std::size_t min_regions,
                                            std::size_t max_regions) {
    const std::size_t k = min_regions + rng.index(max_regions - min_regions + 1);
    const std::size_t per_region = std::max<std::size_t>(max_buses / k, 3);
    std::vector<std::size_t> sizes(k);
    std::size_t n = 0;
    for (std::size_t i = 0; i < k; ++i) {
        sizes[i] = 3 + rng.index(per_region - 2);
        n += sizes[i];
    }
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 1);
    for (std::size_t i = n; i > 1; --i) std::swap(ids[i - 1], ids[rng.index(i)]);

    PartitionedInstance out;
    Network& net = out.network;
    net.buses.resize(n);
    std::vector<std::vector<std::size_t>> members(k);
    std::size_t next = 0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t s = 0; s < sizes[i]; ++s) {
            net.buses[next].id = ids[next];
            members[i].push_back(next++);
        }
    }
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (const auto& m : members) {
        for (std::size_t s = 0; s < m.size(); ++s) add_line(net, used, m[s], m[(s + 1) % m.size()], rng);
        for (std::size_t a = 0; a < m.size(); ++a) {
            for (std::size_t b = a + 2; b < m.size(); ++b) {
                if (rng.next() < 0.25) add_line(net, used, m[a], m[b], rng);
            }
        }
    }
    for (std::size_t i = 1; i < k; ++i) {
        const auto& here = members[i];
        const auto& there = members[rng.index(i)];
        add_line(net, used, here[rng.index(here.size())], there[rng.index(there.size())], rng);
    }
    for (const auto& m : members) {
        make_generator(net.buses[m[rng.index(m.size())]], rng);
        for (std::size_t j : m) {
            if (!net.buses[j].has_generator() && rng.next() < 0.3) make_generator(net.buses[j], rng);
        }
    }
    for (Bus& b : net.buses) b.damping = rng.next(0.05, 0.5);
    balance_loads(net, rng);
    for (const auto& m : members) {
        std::vector<int> region;
        for (std::size_t j : m) region.push_back(net.buses[j].id);
        std::sort(region.begin(), region.end());
        out.regions.push_back(region);
    }
    net.areas = out.regions;
    net.reindex();
    out.injections = net.injections();
    rate_lines(net, out.injections, rng, 1.3, 2.5, 0.3);
    net.reindex();
    net.validate(true);
    return out;
}

Scenario random_scenario(SeededUniform& rng, std::size_t buses, double extra, double slack_lo, double slack_hi) {
    Scenario sc;
    Network& net = sc.network;
    net.buses.resize(buses);
    for (std::size_t j = 0; j < buses; ++j) net.buses[j].id = static_cast<int>(j) + 1;
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (std::size_t j = 1; j < buses; ++j) add_line(net, used, j, rng.index(j), rng);
    for (std::size_t a = 0; a < buses; ++a) {
        for (std::size_t b = a + 1; b < buses; ++b) {
            if (rng.next() < extra) add_line(net, used, a, b, rng);
        }
    }
    make_generator(net.buses[rng.index(buses)], rng);
    for (Bus& b : net.buses) {
        if (!b.has_generator() && rng.next() < 0.35) make_generator(b, rng);
        b.damping = rng.next(0.05, 0.5);
    }
    balance_loads(net, rng);
    if (buses >= 6) {
        std::vector<int> a;
        std::vector<int> b;
        for (std::size_t j = 0; j < buses; ++j) (j < buses / 2 ? a : b).push_back(net.buses[j].id);
        net.areas = {a, b};
    }
    net.reindex();
    sc.injections = net.injections();
    rate_lines(net, sc.injections, rng, slack_lo, slack_hi, 0.05);
    net.reindex();
    net.validate(true);
    return sc;
}

}  // namespace gridcascade::verify
