#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "gridsim/market/ems.hpp"
#include "gridsim/market/game.hpp"
#include "gridsim/metrics/resilience.hpp"
#include "gridsim/sim/engine.hpp"

namespace fs = std::filesystem;
using namespace gridsim;

namespace {

void set_log_level() {
    const char* env = std::getenv("GRIDSIM_LOG_LEVEL");
    if (!env) return;
    const auto lvl = spdlog::level::from_str(env);
    if (lvl == spdlog::level::off && std::string(env) != "off")
        spdlog::warn("GRIDSIM_LOG_LEVEL '{}' not recognized, keeping info", env);
    else
        spdlog::set_level(lvl);
}

bool on_off(const std::string& s, const char* flag) {
    if (s == "on") return true;
    if (s == "off") return false;
    throw ConfigError(std::string(flag) + " expects on or off, got '" + s + "'");
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

struct RunArgs {
    std::string config = sim::default_scenario_path();
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
    std::string out = "out";
    std::string controllers;
    std::string hybrid, attacks, dynamics;
};

void write_summary(const sim::SimulationResult& r, const fs::path& path) {
    auto out = open_out(path);
    out << "steps " << r.steps << "\nbuses " << r.buses << "\nrecords " << r.records.size() << "\ndiverged_steps "
        << r.diverged_steps.size() << "\nwall_seconds " << sim::format_g6(r.wall_seconds) << '\n';
    for (const auto& w : r.attack_windows) out << "attack_window " << w.start << ' ' << w.end << '\n';
    for (const auto& name : sim::series_names()) {
        const auto st = metrics::summarize(sim::get_series(r, name), r.moving_average_window);
        out << name << " min " << sim::format_g6(st.min) << " max " << sim::format_g6(st.max) << " mean "
            << sim::format_g6(st.mean);
        if (name == "resilience") out << " in_band " << sim::format_g6(st.fraction_in_band);
        out << '\n';
    }
}

int cmd_run(const RunArgs& a) {
    auto cfg = sim::load_scenario(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.steps) cfg.steps = *a.steps;
    if (!a.controllers.empty()) cfg.controllers = sim::parse_controllers(a.controllers);
    if (!a.hybrid.empty()) cfg.hybrid = on_off(a.hybrid, "--hybrid");
    if (!a.attacks.empty()) cfg.enable_attacks = on_off(a.attacks, "--attacks");
    if (!a.dynamics.empty()) cfg.enable_dynamics = on_off(a.dynamics, "--dynamics");

    spdlog::info("running {} steps, seed {}", cfg.steps, cfg.seed);
    const auto r = sim::run_scenario(cfg);
    const fs::path dir = a.out;
    fs::create_directories(dir);
    sim::write_records(r.records, (dir / "records.csv").string());
    sim::write_series_table(r, (dir / "series.csv").string());
    write_summary(r, dir / "summary.txt");
    spdlog::info("wrote {} records to {} in {:.1f} s", r.records.size(), dir.string(), r.wall_seconds);
    return 0;
}

struct ExportArgs {
    std::string series;
    std::string in = "out/series.csv";
    std::string out;
    std::size_t window = 100;
};

int cmd_export(const ExportArgs& a) {
    const auto table = sim::read_series_table(a.in);
    const auto it = table.find(a.series);
    if (it == table.end()) {
        std::string list;
        for (const auto& [name, v] : table) list += (list.empty() ? "" : ", ") + name;
        throw ConfigError("unknown series '" + a.series + "'; available: " + list);
    }
    const std::string path = a.out.empty() ? (fs::path(a.in).parent_path() / (a.series + ".csv")).string() : a.out;
    sim::write_series_csv(it->second, a.window, path);
    spdlog::info("wrote {} ({} points)", path, it->second.size());
    return 0;
}

struct AuditArgs {
    std::string records = "out/records.csv";
    std::string config = sim::default_scenario_path();
    std::string out;
    double gen_a = 1e-5;
    double gen_b = 0.05;
    double storage_cost = 1e-4;
    double switch_cost = 0.01;
    double feeder_max_kw = 5000.0;
};

// Offline EMS pass over a logged run: cost accounting and limit checks.
int cmd_audit(const AuditArgs& a) {
    const auto cfg = sim::load_scenario(a.config);
    const auto recs = sim::read_records(a.records);
    if (recs.empty()) throw DomainError("records file has no rows: " + a.records);

    std::vector<std::vector<const sim::StepRecord*>> steps;
    for (const auto& r : recs) {
        if (steps.empty() || r.bus_id <= steps.back().back()->bus_id) steps.emplace_back();
        steps.back().push_back(&r);
    }
    const double dt_h = cfg.dt / 3600.0;
    const auto& bat = cfg.devices.battery.params;

    std::vector<market::DispatchStep> series;
    std::size_t v_low = 0, v_high = 0, soc_out = 0, p_storage_out = 0;
    double v_min = 1e9, v_max = -1e9, f_min = 1e9, f_max = -1e9;
    const double soc_tol = 1e-3;  // percent, covers CSV rounding
    for (std::size_t k = 0; k < steps.size(); ++k) {
        market::DispatchStep d;
        d.p_gen = {steps[k].front()->feeder_power};
        for (std::size_t i = 0; i < steps[k].size(); ++i) {
            const auto& r = *steps[k][i];
            d.p_load.push_back(r.load_p);
            d.u.push_back(r.edge_control_action);
            v_min = std::min(v_min, r.voltage);
            v_max = std::max(v_max, r.voltage);
            f_min = std::min(f_min, r.frequency);
            f_max = std::max(f_max, r.frequency);
            if (r.voltage < 0.95) ++v_low;
            if (r.voltage > 1.05) ++v_high;
            if (r.battery_soc_pct < 100.0 * bat.soc_min - soc_tol || r.battery_soc_pct > 100.0 * bat.soc_max + soc_tol)
                ++soc_out;
            double p = 0.0;
            if (k > 0 && i < steps[k - 1].size()) {
                const double de = (r.battery_soc_pct - steps[k - 1][i]->battery_soc_pct) / 100.0 * bat.e_max;
                p = de >= 0.0 ? de / (bat.eta_charge * dt_h) : de * bat.eta_discharge / dt_h;
                if (std::abs(p) > bat.p_max * 1.01) ++p_storage_out;
            }
            d.p_storage.push_back(p);
        }
        if (k > 0 && d.u.size() != series.back().u.size()) throw ConfigError("records file: bus count changes between steps");
        series.push_back(std::move(d));
    }

    market::EmsCostParams cost;
    cost.gen_cost = {{a.gen_a, a.gen_b, 0.0}};
    cost.storage_cost = a.storage_cost;
    cost.switch_cost = a.switch_cost;
    market::DispatchConstraints lim;
    lim.p_g_min = {-a.feeder_max_kw};
    lim.p_g_max = {a.feeder_max_kw};
    const auto breakdown = market::ems_cost_breakdown(series, cost, dt_h);
    const auto violations = market::check_constraints(series, lim, dt_h);

    const std::string path = a.out.empty() ? (fs::path(a.records).parent_path() / "audit.txt").string() : a.out;
    auto out = open_out(path);
    using sim::format_g6;
    out << "records " << recs.size() << "\nsteps " << steps.size() << "\nbuses " << steps.front().size() << '\n';
    out << "cost_generation " << format_g6(breakdown.generation) << "\ncost_storage " << format_g6(breakdown.storage)
        << "\ncost_switching " << format_g6(breakdown.switching) << "\ncost_curtailment n/a (not logged)\ncost_total "
        << format_g6(breakdown.total()) << '\n';
    out << "voltage_min " << format_g6(v_min) << "\nvoltage_max " << format_g6(v_max) << "\nvoltage_below_0.95 " << v_low
        << "\nvoltage_above_1.05 " << v_high << '\n';
    out << "frequency_min " << format_g6(f_min) << "\nfrequency_max " << format_g6(f_max) << '\n';
    out << "soc_out_of_limits " << soc_out << "\nstorage_power_over_limit " << p_storage_out << '\n';
    out << "feeder_limit_violations " << violations.size() << '\n';
    for (std::size_t i = 0; i < std::min<std::size_t>(violations.size(), 20); ++i)
        out << "violation " << violations[i].describe() << '\n';
    spdlog::info("audit of {} steps written to {}", steps.size(), path);
    return 0;
}

struct EquilibriumArgs {
    std::string config = sim::default_scenario_path();
    std::string out = "equilibrium.txt";
    std::string mode = "gauss-seidel";
    double tol = 1e-12;
    int max_rounds = 10000;
    std::size_t samples = 1000;
    std::uint64_t seed = 42;
};

int cmd_equilibrium(const EquilibriumArgs& a) {
    const auto cfg = sim::load_scenario(a.config);
    auto agents = cfg.prosumers;
    if (agents.empty()) agents.assign(2, market::ProsumerAgent{});
    market::UpdateMode mode;
    if (a.mode == "gauss-seidel")
        mode = market::UpdateMode::gauss_seidel;
    else if (a.mode == "jacobi")
        mode = market::UpdateMode::jacobi;
    else
        throw ConfigError("--mode expects gauss-seidel or jacobi");

    const auto st = market::best_response_dynamics(agents, cfg.price, a.tol, a.max_rounds, mode);
    Rng rng(a.seed);
    const auto nash = market::nash_check(agents, st, rng, a.samples);

    auto out = open_out(a.out);
    using sim::format_g6;
    out << "agents " << agents.size() << "\nconverged " << (st.converged ? 1 : 0) << "\nrounds " << st.rounds
        << "\nresidual " << format_g6(st.residual) << "\nprice " << format_g6(st.price) << '\n';
    for (std::size_t i = 0; i < agents.size(); ++i)
        out << "agent " << i << " strategy " << format_g6(st.strategies[i]) << " utility "
            << format_g6(market::utility(agents[i], st.strategies[i], st.price)) << '\n';
    out << "deviation_samples " << nash.samples << "\nmax_deviation_gain " << format_g6(nash.max_gain) << '\n';
    if (!st.converged) spdlog::warn("best-response dynamics did not converge in {} rounds", a.max_rounds);
    spdlog::info("equilibrium written to {}", a.out);
    return st.converged ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    set_log_level();
    CLI::App app{"Cyber-physical distribution grid co-simulation"};
    app.require_subcommand(1);

    RunArgs run;
    auto* r = app.add_subcommand("run", "Run a scenario and write records.csv, series.csv and summary.txt");
    r->add_option("--config", run.config, "Scenario JSON")->check(CLI::ExistingFile);
    r->add_option("--seed", run.seed, "Override the scenario seed");
    r->add_option("--steps", run.steps, "Override the step count");
    r->add_option("--out", run.out, "Output directory");
    r->add_option("--controllers", run.controllers, "Subset, e.g. adp,ppo,dqn");
    r->add_option("--hybrid", run.hybrid, "on|off");
    r->add_option("--attacks", run.attacks, "on|off");
    r->add_option("--dynamics", run.dynamics, "on|off");

    ExportArgs ex;
    auto* e = app.add_subcommand("export", "Write one series with its moving average");
    e->add_option("--series", ex.series, "Series name")->required();
    e->add_option("--in", ex.in, "series.csv from a run");
    e->add_option("--out", ex.out, "Output file (default NAME.csv next to the input)");
    e->add_option("--window", ex.window, "Moving-average window")->check(CLI::PositiveNumber);

    AuditArgs au;
    auto* a = app.add_subcommand("audit", "EMS cost and constraint report over a records file");
    a->add_option("--records", au.records, "records.csv from a run");
    a->add_option("--config", au.config, "Scenario JSON used for the run")->check(CLI::ExistingFile);
    a->add_option("--out", au.out, "Report file (default audit.txt next to the records)");
    a->add_option("--gen-a", au.gen_a, "Quadratic feeder cost coefficient");
    a->add_option("--gen-b", au.gen_b, "Linear feeder cost coefficient");
    a->add_option("--storage-cost", au.storage_cost, "Battery throughput cost");
    a->add_option("--switch-cost", au.switch_cost, "Control switching cost");
    a->add_option("--feeder-max-kw", au.feeder_max_kw, "Feeder import/export limit");

    EquilibriumArgs eq;
    auto* q = app.add_subcommand("equilibrium", "Run the prosumer game standalone");
    q->add_option("--config", eq.config, "Scenario JSON with a market section")->check(CLI::ExistingFile);
    q->add_option("--out", eq.out, "Report file");
    q->add_option("--mode", eq.mode, "gauss-seidel|jacobi");
    q->add_option("--tol", eq.tol, "Convergence tolerance");
    q->add_option("--max-rounds", eq.max_rounds, "Round limit");
    q->add_option("--samples", eq.samples, "Deviation samples per agent");
    q->add_option("--seed", eq.seed, "Seed for deviation sampling");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*r) return cmd_run(run);
        if (*e) return cmd_export(ex);
        if (*a) return cmd_audit(au);
        if (*q) return cmd_equilibrium(eq);
    } catch (const std::exception& err) {
        spdlog::error("{}", err.what());
        return 2;
    }
    return 1;
}
