#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridcascade/cascade.hpp"
#include "gridcascade/errors.hpp"
#include "gridcascade/graph.hpp"
#include "gridcascade/harness.hpp"
#include "gridcascade/netmodel.hpp"
#include "gridcascade/verify.hpp"

using namespace gridcascade;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Network load_network(const std::string& path, const std::string& switch_off_list) {
    std::vector<std::string> warnings;
    Network net = load_case(path, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
    if (!switch_off_list.empty()) {
        const auto pairs = parse_line_pairs(switch_off_list);
        net = switch_off(net, pairs);
    }
    return net;
}

int run_partition(const std::string& path, const std::string& switch_off_list) {
    const Network net = load_network(path, switch_off_list);
    const TreePartition tp = tree_partition(net);
    nlohmann::json doc;
    doc["buses"] = net.bus_count();
    doc["lines"] = net.line_count();
    doc["regions"] = tp.regions;
    doc["bridges"] = tp.bridges;
    if (net.areas.size() > 1) {
        const ReducedMultigraph g = reduced_multigraph(net, net.areas);
        nlohmann::json ties = nlohmann::json::array();
        for (const ReducedEdge& e : g.edges) ties.push_back(e.line);
        doc["areas"] = {{"count", net.areas.size()}, {"tie_lines", ties}, {"is_tree", g.is_tree}};
    }
    std::cout << doc.dump(2) << '\n';
    return 0;
}

struct CascadeArgs {
    std::string case_path;
    std::string fail;
    std::string controller = "uc";
    std::string switch_off_list;
    std::string trace_out;
    std::string detect = "exact";
    std::string ladder_path;
    double dual_cap = 0.0;
    double dual_window = 10.0;
    double alpha_line = 1.0;
    double alpha_gen = 1.0;
};

int run_cascade_cmd(const CascadeArgs& a) {
    Network net = load_network(a.case_path, a.switch_off_list);
    if (a.alpha_line != 1.0 || a.alpha_gen != 1.0) net = scale_capacities(net, a.alpha_line, a.alpha_gen);
    Scenario sc;
    sc.injections = net.injections();
    sc.alpha_line = a.alpha_line;
    sc.alpha_gen = a.alpha_gen;
    sc.network = std::move(net);
    const Network& n = sc.network;

    std::vector<int> fail;
    for (const auto& [i, j] : parse_line_pairs(a.fail)) {
        const auto e = n.find_line(i, j);
        if (!e) throw TopologyError("no line between buses " + std::to_string(i) + " and " + std::to_string(j));
        fail.push_back(n.lines[*e].id);
    }
    CascadeConfig cfg;
    cfg.controller = parse_controller(a.controller);
    cfg.detect = parse_detect(a.detect);
    cfg.integrator.dual_cap = a.dual_cap;
    cfg.integrator.window = a.dual_window;
    if (!a.ladder_path.empty()) cfg.ladder = parse_ladder(read_file(a.ladder_path), n);

    const CascadeTrace trace = run_cascade(sc, fail, cfg);
    const std::string json = trace_to_json(n, trace);
    if (!a.trace_out.empty()) std::ofstream(a.trace_out) << json << '\n';

    std::cout << "stages " << trace.stages.size() << ", status "
              << (trace.status == CascadeStatus::contained ? "contained" : "exhausted") << '\n';
    for (const StageRecord& s : trace.stages) {
        std::cout << "  stage " << s.stage << ": " << s.tripped.size() << " lines out, " << s.new_failures.size()
                  << " new failures";
        if (s.critical) std::cout << ", critical (" << s.actions.size() << " lifting actions)";
        if (s.shed > 0.0) std::cout << ", shed " << s.shed;
        std::cout << '\n';
    }
    std::cout << "successive failures " << trace.successive_failures() << ", load loss rate "
              << (trace.total_demand > 0.0 ? trace.total_shed / trace.total_demand : 0.0) << ", adjusted generators "
              << trace.adjusted_generators(n) << '\n';
    return trace.status == CascadeStatus::contained ? 0 : 3;
}

struct ScanArgs {
    std::string case_path;
    std::string controller = "uc";
    std::string switch_off_list;
    std::string out;
    std::string detect = "exact";
    std::size_t profiles = 10;
    std::uint64_t seed = 1;
    double perturb = 0.25;
    double alpha_line = 1.0;
    double alpha_gen = 1.0;
    std::size_t threads = 0;
};

int run_scan(const ScanArgs& a) {
    Network net = load_network(a.case_path, a.switch_off_list);
    net = scale_capacities(net, a.alpha_line, a.alpha_gen);
    ProfileSet set = generate_profiles(net, a.profiles, a.perturb, a.seed);
    for (Scenario& s : set.scenarios) {
        s.alpha_line = a.alpha_line;
        s.alpha_gen = a.alpha_gen;
    }
    if (set.rejected > 0) std::cerr << set.rejected << " load draws rejected (no secure dispatch)\n";
    ScanConfig cfg;
    cfg.cascade.controller = parse_controller(a.controller);
    cfg.cascade.detect = parse_detect(a.detect);
    cfg.threads = a.threads;
    std::ostringstream desc;
    desc << "case=" << a.case_path << ";switch_off=" << a.switch_off_list << ";seed=" << a.seed
         << ";perturb=" << a.perturb << ";alpha_line=" << a.alpha_line << ";alpha_gen=" << a.alpha_gen;
    cfg.description = desc.str();
    const ScanReport report = n_minus_1_scan(set.scenarios, cfg);
    write_report(report, a.out);
    std::cout << "cells " << report.cells.size() << " (" << report.failures << " failed)\n"
              << "vulnerable lines per profile: mean " << report.vulnerable.mean << ", std "
              << report.vulnerable.stddev << ", range [" << report.vulnerable.min << ", " << report.vulnerable.max
              << "]\n"
              << "max load loss rate " << report.max_loss_rate << "\n"
              << "config " << report.config_hash << '\n';
    return 0;
}

int run_verify(bool quick) {
    using namespace gridcascade::verify;
    const std::size_t scale = quick ? 5 : 1;
    std::vector<SuiteResult> results;
    results.push_back(bridge_nulling_suite(200 / scale));
    results.push_back(localization_suite(200 / scale));
    results.push_back(closure_potential_suite(200 / scale));
    results.push_back(matrix_forest_suite(quick ? 4 : 5));
    results.push_back(detector_suite(50 / scale));
    results.push_back(droop_suite(100 / scale));
    results.push_back(cascade_oracle_suite(50 / scale));
    results.push_back(partition_sweep(quick ? 6 : 8));
    bool ok = true;
    for (const SuiteResult& r : results) {
        std::cout << (r.ok() ? "PASS " : "FAIL ") << describe(r) << '\n';
        ok = ok && r.ok();
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Staged cascading-failure simulation for DC power networks"};
    app.require_subcommand(1);

    std::string part_case;
    std::string part_switch;
    auto* part = app.add_subcommand("partition", "Print the tree-partition of a case");
    part->add_option("case", part_case, "Case file (.json or .m)")->required();
    part->add_option("--switch-off", part_switch, "Lines to switch off, e.g. 15-33,19-34");

    CascadeArgs ca;
    auto* casc = app.add_subcommand("cascade", "Simulate one cascade");
    casc->add_option("--case", ca.case_path, "Case file")->required();
    casc->add_option("--fail", ca.fail, "Initial failure as bus pairs, e.g. 1-2,3-4")->required();
    casc->add_option("--controller", ca.controller, "droop, agc or uc")->capture_default_str();
    casc->add_option("--switch-off", ca.switch_off_list, "Lines to switch off first");
    casc->add_option("--trace-out", ca.trace_out, "Write the stage trace as JSON");
    casc->add_option("--detect", ca.detect, "Critical-stage detection: exact or dynamic")->capture_default_str();
    casc->add_option("--dual-cap", ca.dual_cap, "Divergence threshold on |lambda| (0 = automatic)");
    casc->add_option("--dual-window", ca.dual_window, "Divergence window in time units")->capture_default_str();
    casc->add_option("--ladder", ca.ladder_path, "JSON file with the lifting ladder");
    casc->add_option("--alpha-line", ca.alpha_line, "Line rating scale")->capture_default_str();
    casc->add_option("--alpha-gen", ca.alpha_gen, "Generator limit scale")->capture_default_str();

    ScanArgs sa;
    auto* scan = app.add_subcommand("scan", "N-1 scan over random load profiles");
    scan->add_option("--case", sa.case_path, "Case file")->required();
    scan->add_option("--controller", sa.controller, "droop, agc or uc")->capture_default_str();
    scan->add_option("--profiles", sa.profiles, "Number of load profiles")->capture_default_str();
    scan->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
    scan->add_option("--perturb", sa.perturb, "Load perturbation magnitude")->capture_default_str();
    scan->add_option("--alpha-line", sa.alpha_line, "Line rating scale")->capture_default_str();
    scan->add_option("--alpha-gen", sa.alpha_gen, "Generator limit scale")->capture_default_str();
    scan->add_option("--switch-off", sa.switch_off_list, "Lines to switch off first");
    scan->add_option("--detect", sa.detect, "exact or dynamic")->capture_default_str();
    scan->add_option("--threads", sa.threads, "Worker threads (0 = all cores)");
    scan->add_option("--out", sa.out, "Output directory")->required();

    bool quick = false;
    auto* ver = app.add_subcommand("verify", "Run the property suites against their oracles");
    ver->add_flag("--quick", quick, "Smaller instance counts");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*part) return run_partition(part_case, part_switch);
        if (*casc) return run_cascade_cmd(ca);
        if (*scan) return run_scan(sa);
        if (*ver) return run_verify(quick);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
