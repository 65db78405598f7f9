#pragma once

// Small hand-built networks shared by the unit tests.

#include <initializer_list>
#include <tuple>
#include <vector>

#include "gridcascade/netmodel.hpp"

namespace fixtures {

using gridcascade::Bus;
using gridcascade::BusKind;
using gridcascade::Line;
using gridcascade::Network;

struct Edge {
    int from;
    int to;
    double susceptance = 1.0;
    double capacity = 10.0;
};

inline Network make_network(int buses, std::initializer_list<Edge> edges) {
    Network net;
    for (int j = 1; j <= buses; ++j) {
        Bus b;
        b.id = j;
        net.buses.push_back(b);
    }
    int id = 1;
    for (const Edge& e : edges) {
        Line l;
        l.id = id++;
        l.from = e.from;
        l.to = e.to;
        l.susceptance = e.susceptance;
        l.capacity = e.capacity;
        net.lines.push_back(l);
    }
    net.reindex();
    return net;
}

inline void make_generator(Network& net, int id, double gain, double d_min, double d_max, double damping = 0.0) {
    Bus& b = net.buses[net.bus_index(id)];
    b.kind = BusKind::generator;
    b.droop_gain = gain;
    b.damping = damping;
    b.d_min = d_min;
    b.d_max = d_max;
    b.gen_max = d_max - d_min;
    b.gen_p = d_max;
}

// Triangle 1-2, 2-3, 1-3.
inline Network tri() { return make_network(3, {{1, 2}, {2, 3}, {1, 3}}); }

// Triangle fed at bus 1 with the load at bus 3; the (1,3) line is the weak one.
inline Network vee() { return make_network(3, {{1, 2, 1.0, 2.0}, {2, 3, 1.0, 2.0}, {1, 3, 1.0, 1.5}}); }

// Triangles {1,2,3} and {4,5,6} joined by the bridge (3,4).
inline Network bowtie() {
    return make_network(6, {{1, 2}, {2, 3}, {1, 3}, {3, 4}, {4, 5}, {5, 6}, {4, 6}});
}

inline Network path3() { return make_network(3, {{1, 2}, {2, 3}}); }

}  // namespace fixtures
