#include "gridcascade/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "gridcascade/controllers.hpp"
#include "gridcascade/errors.hpp"

namespace gridcascade {

ProfileSet generate_profiles(const Network& network, std::size_t count, double magnitude, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("generate_profiles: count must be at least 1");
    const std::vector<double> base = [&] {
        std::vector<double> v;
        for (const Bus& b : network.buses) v.push_back(b.demand);
        return v;
    }();
    SeededUniform master(seed);
    ProfileSet out;
    std::size_t streak = 0;
    while (out.scenarios.size() < count) {
        const std::uint64_t draw_seed = master.next_u64();
        const std::vector<double> demand = perturb_loads(network, base, magnitude, draw_seed);
        const DispatchResult dispatch = dc_opf(network, demand);
        if (!dispatch.feasible) {
            ++out.rejected;
            if (++streak >= 1000)
                throw Error("generate_profiles: 1000 consecutive load draws had no secure dispatch; "
                            "lower the perturbation or raise the ratings");
            continue;
        }
        streak = 0;
        Scenario s;
        s.network = apply_dispatch(network, demand, dispatch);
        s.injections = dispatch.p;
        s.seed = draw_seed;
        out.scenarios.push_back(std::move(s));
    }
    return out;
}

SpreadStats spread_of(std::span<const double> values) {
    SpreadStats s;
    if (values.empty()) return s;
    double sum = 0.0;
    s.min = values.front();
    s.max = values.front();
    for (double v : values) {
        sum += v;
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.stddev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    return s;
}

CcdfSeries emit_ccdf(std::span<const double> values) {
    CcdfSeries out;
    if (values.empty()) return out;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> thresholds = sorted;
    thresholds.push_back(0.0);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    const double n = static_cast<double>(sorted.size());
    for (double t : thresholds) {
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
        out.emplace_back(t, static_cast<double>(above) / n);
    }
    return out;
}

std::string config_digest(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::size_t worker_count(std::size_t requested) {
    std::size_t n = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GRIDCASCADE_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
    }
    return std::max<std::size_t>(n, 1);
}

ScanReport n_minus_1_scan(std::span<const Scenario> scenarios, const ScanConfig& config) {
    struct Job {
        std::size_t profile;
        std::size_t line;
    };
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < scenarios.size(); ++p) {
        for (std::size_t e = 0; e < scenarios[p].network.line_count(); ++e) jobs.push_back({p, e});
    }
    std::vector<ScenarioMetrics> cells(jobs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            const Scenario& sc = scenarios[jobs[k].profile];
            const int line_id = sc.network.lines[jobs[k].line].id;
            ScenarioMetrics& m = cells[k];
            m.profile = jobs[k].profile;
            m.line = line_id;
            m.controller = config.cascade.controller;
            try {
                const int fail[] = {line_id};
                const CascadeTrace trace = run_cascade(sc, fail, config.cascade);
                m.stages = trace.stages.size();
                m.load_loss_rate = trace.total_demand > 0.0 ? trace.total_shed / trace.total_demand : 0.0;
                m.adjusted_generators = trace.adjusted_generators(sc.network);
                m.critical = trace.critical();
                m.vulnerable = trace.successive_failures() > 0 || trace.total_shed > 1e-9;
            } catch (const std::exception& ex) {
                m.failed = true;
                m.error = ex.what();
            }
        }
    };
    const std::size_t workers = std::min(worker_count(config.threads), std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    ScanReport report;
    std::sort(cells.begin(), cells.end(), [](const ScenarioMetrics& a, const ScenarioMetrics& b) {
        return a.profile != b.profile ? a.profile < b.profile : a.line < b.line;
    });
    report.vulnerable_per_profile.assign(scenarios.size(), 0.0);
    std::vector<double> losses;
    std::vector<double> gens;
    for (const ScenarioMetrics& m : cells) {
        if (m.failed) {
            ++report.failures;
            continue;
        }
        if (m.vulnerable) report.vulnerable_per_profile[m.profile] += 1.0;
        losses.push_back(m.load_loss_rate);
        gens.push_back(static_cast<double>(m.adjusted_generators));
        report.max_loss_rate = std::max(report.max_loss_rate, m.load_loss_rate);
    }
    report.vulnerable = spread_of(report.vulnerable_per_profile);
    report.loss_ccdf = emit_ccdf(losses);
    report.generator_ccdf = emit_ccdf(gens);
    report.cells = std::move(cells);

    std::ostringstream desc;
    desc << config.description << ";controller=" << controller_name(config.cascade.controller)
         << ";detect=" << (config.cascade.detect == DetectMode::exact ? "exact" : "dynamic")
         << ";overload_tol=" << config.cascade.overload_tol << ";profiles=" << scenarios.size();
    for (const Scenario& s : scenarios) desc << ";seed=" << s.seed;
    report.config_hash = config_digest(desc.str());
    return report;
}

void write_report(const ScanReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "cells.csv");
        out << "profile,line,controller,vulnerable,loss_rate,adjusted_gens,stages,critical\n";
        out << std::setprecision(10);
        for (const ScenarioMetrics& m : report.cells) {
            out << m.profile << ',' << m.line << ',' << controller_name(m.controller) << ',' << (m.vulnerable ? 1 : 0)
                << ',' << m.load_loss_rate << ',' << m.adjusted_generators << ',' << m.stages << ','
                << (m.critical ? 1 : 0) << '\n';
        }
    }
    auto write_ccdf = [&](const char* name, const CcdfSeries& s) {
        std::ofstream out(dir / name);
        out << "threshold,fraction\n" << std::setprecision(10);
        for (const auto& [t, f] : s) out << t << ',' << f << '\n';
    };
    write_ccdf("ccdf_loss.csv", report.loss_ccdf);
    write_ccdf("ccdf_generators.csv", report.generator_ccdf);

    nlohmann::json doc;
    doc["config_hash"] = report.config_hash;
    doc["profiles"] = report.vulnerable_per_profile.size();
    doc["cells"] = report.cells.size();
    doc["failed_cells"] = report.failures;
    doc["vulnerable_lines"] = {{"mean", report.vulnerable.mean},
                               {"std", report.vulnerable.stddev},
                               {"min", report.vulnerable.min},
                               {"max", report.vulnerable.max},
                               {"per_profile", report.vulnerable_per_profile}};
    doc["max_load_loss_rate"] = report.max_loss_rate;
    nlohmann::json errors = nlohmann::json::array();
    for (const ScenarioMetrics& m : report.cells) {
        if (m.failed) errors.push_back({{"profile", m.profile}, {"line", m.line}, {"error", m.error}});
    }
    doc["errors"] = errors;
    std::ofstream(dir / "summary.json") << doc.dump(2) << '\n';
}

}  // namespace gridcascade
