#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

#include "gridsim/sim/engine.hpp"

using namespace gridsim;
using namespace gridsim::sim;

namespace {

ScenarioConfig short_run(long steps, std::uint64_t seed = 42) {
    auto c = load_scenario(default_scenario_path());
    c.steps = steps;
    c.seed = seed;
    return c;
}

ScenarioConfig quiet_run(long steps) {
    auto c = short_run(steps);
    c.enable_attacks = false;
    c.channel.p_drop = 0.0;
    c.channel.delay_pmf = {1.0, 0.0, 0.0, 0.0};
    c.channel.sigma_v = 0.0;
    c.channel.sigma_f = 0.0;
    c.fdi.p_fdi = 0.0;
    c.actuation.sigma_edge = 0.0;
    c.devices.load.jump_prob = 0.0;
    c.devices.solar.params.dip_prob = 0.0;
    return c;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("gridsim_test_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("record header is the 28-column schema") {
    CHECK(record_header() ==
          "Timestamp,BusID,Voltage(pu),Angle(rad),LoadP(kW),LoadQ(kVAR),SolarGen(kW),WindGen(kW),BatterySOC(%),"
          "EVLoad(kW),Frequency(Hz),FeederPower(kW),CommunicationDelay(ms),PacketLossRate,FDI_Attack,FDI_Severity,"
          "MeasurementError,ADP_ValueFunction,ADP_ControlAction,PPO_Action,PPO_Reward,DQN_QValue,DQN_Action,"
          "ResilienceIndex,Edge_EstimatedState,Cloud_OptimizedState,Edge_ControlAction,Cloud_UpdateFlag");
    CHECK(record_columns.size() == 28);
}

TEST_CASE("timestamps compress one day onto the run") {
    CHECK(step_timestamp(0, 6000) == "11/1/2025 0:00:00");
    CHECK(step_timestamp(1, 6000) == "11/1/2025 0:00:14");
    CHECK(step_timestamp(250, 6000) == "11/1/2025 1:00:00");
    CHECK(step_timestamp(5999, 6000) == "11/1/2025 23:59:45");
    CHECK(step_timestamp(6000, 6000) == "11/2/2025 0:00:00");
    CHECK(step_timestamp(0, 6000, 12.0) == "11/1/2025 12:00:00");
    CHECK(step_timestamp(3000, 6000, 12.0) == "11/2/2025 0:00:00");
}

TEST_CASE("state cells and rounding") {
    CHECK(state_cell(0.954, 0.003) == "V=0.954;A=0.003");
    CHECK(state_cell(1.0, -0.0421) == "V=1.000;A=-0.042");
    CHECK(format_g6(0.123456789) == "0.123457");
    CHECK(round6(1234567.0) == 1234570.0);
    CHECK(std::signbit(round6(-1e-300 * 1e-300)) == false);
    CHECK(std::signbit(round_fixed3(-0.0001)) == false);
}

TEST_CASE("steps must be positive") {
    auto c = short_run(0);
    CHECK_THROWS_AS(run_scenario(c), ConfigError);
    c.steps = -5;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("scenario json") {
    const auto c = load_scenario(default_scenario_path());
    CHECK(c.steps == 6000);
    CHECK(c.seed == 42);
    CHECK(c.controllers.adp);
    CHECK(c.controllers.ppo);
    CHECK(c.controllers.dqn);
    CHECK(c.hybrid);
    CHECK(c.pretrain_episodes == 0);
    CHECK(std::filesystem::exists(c.network_file));

    nlohmann::json j = {{"steps", 10}, {"flags", {{"controllers", {"adp", "sarsa"}}}}};
    CHECK_THROWS_AS(scenario_from_json(j), ConfigError);
    CHECK_THROWS_AS(parse_controllers("adp,foo"), ConfigError);
    CHECK_THROWS_AS(parse_controllers(""), ConfigError);
    const auto set = parse_controllers("dqn,adp");
    CHECK(set.adp);
    CHECK_FALSE(set.ppo);
    CHECK(set.dqn);

    nlohmann::json bad = {{"steps", 0}};
    CHECK_THROWS_AS(scenario_from_json(bad), ConfigError);
    CHECK_THROWS_AS(load_scenario(temp_path("missing.json")), std::exception);
}

TEST_CASE("short run shape and records") {
    const long steps = 40;
    const auto r = run_scenario(short_run(steps));
    REQUIRE(r.buses == 33);
    CHECK(r.records.size() == static_cast<std::size_t>(steps) * 33);
    CHECK(r.ppo_continuous.size() == r.records.size());
    CHECK(r.diverged_steps.empty());
    for (const auto& name : series_names()) CHECK(get_series(r, name).size() == static_cast<std::size_t>(steps));
    CHECK(r.log.size() == static_cast<std::size_t>(steps));

    const auto& first = r.records.front();
    CHECK(first.timestamp == "11/1/2025 0:00:00");
    CHECK(first.bus_id == 1);
    CHECK(first.voltage == Catch::Approx(1.0).margin(1e-6));
    CHECK(r.records[33].timestamp == "11/1/2025 0:00:14");

    const std::regex cell(R"(V=-?\d+\.\d{3};A=-?\d+\.\d{3})");
    const auto row = to_csv_row(first);
    const auto fields = detail::split_commas(row);
    REQUIRE(fields.size() == 28);
    CHECK(std::regex_match(std::string(fields[24]), cell));
    CHECK(std::regex_match(std::string(fields[25]), cell));

    for (std::size_t k = 0; k < r.records.size(); ++k) {
        const auto& rec = r.records[k];
        CHECK(rec.bus_id == static_cast<int>(k % 33) + 1);
        CHECK(rec.resilience <= 1.0);
        CHECK(std::isfinite(rec.resilience));
        CHECK(rec.packet_loss_rate >= 0.0);
        CHECK(rec.packet_loss_rate <= 1.0);
        CHECK(rec.battery_soc_pct >= 20.0 - 1e-9);
        CHECK(rec.battery_soc_pct <= 90.0 + 1e-9);
        CHECK((rec.cloud_update_flag == 0 || rec.cloud_update_flag == 1));
        CHECK((rec.fdi_attack == 0 || rec.fdi_attack == 1));
        CHECK(rec.ppo_action >= 0);
        CHECK(rec.ppo_action <= 3);
    }

    const auto& bus5 = get_series(r, "bus5_voltage");
    for (long k = 0; k < steps; ++k) CHECK(r.records[static_cast<std::size_t>(k) * 33 + 4].voltage == round6(bus5[k]));

    const auto& total = get_series(r, "cost_total");
    const auto& adp = get_series(r, "cost_adp");
    const auto& ppo = get_series(r, "cost_ppo");
    const auto& dqn = get_series(r, "cost_dqn");
    for (long k = 0; k < steps; ++k) {
        CHECK(total[k] >= adp[k]);
        CHECK(total[k] >= ppo[k]);
        CHECK(total[k] >= dqn[k]);
        CHECK(total[k] == Catch::Approx(adp[k] + ppo[k] + dqn[k]).epsilon(1e-12));
    }
}

TEST_CASE("cloud update flag follows the sync period") {
    auto c = short_run(120);
    c.cloud_sync_period = 50;
    const auto r = run_scenario(c);
    for (long k = 0; k < c.steps; ++k) {
        const int expect = (k + 1) % 50 == 0 ? 1 : 0;
        CHECK(r.records[static_cast<std::size_t>(k) * 33].cloud_update_flag == expect);
    }
}

TEST_CASE("records round trip through csv") {
    const auto r = run_scenario(short_run(12));
    const auto path = temp_path("records.csv");
    write_records(r.records, path);
    const auto text = slurp(path);
    CHECK(text.substr(0, text.find('\n')) == record_header());
    const auto back = read_records(path);
    REQUIRE(back.size() == r.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == r.records[i]);

    write_records(back, path + ".2");
    CHECK(slurp(path + ".2") == text);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".2");
}

TEST_CASE("record writing errors") {
    CHECK_THROWS_AS(write_records({}, temp_path("empty.csv")), DomainError);
    std::vector<StepRecord> one(1);
    CHECK_THROWS_AS(write_records(one, "/nonexistent-dir/records.csv"), IoError);
    CHECK_THROWS_AS(read_records("/nonexistent-dir/records.csv"), IoError);

    const auto path = temp_path("badheader.csv");
    {
        std::ofstream out(path);
        out << "a,b,c\n";
    }
    CHECK_THROWS_AS(read_records(path), ConfigError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(parse_csv_row("1,2,3"), ConfigError);
}

TEST_CASE("disturbance-free run has unit resilience") {
    const auto r = run_scenario(quiet_run(60));
    for (const auto& rec : r.records) CHECK(rec.resilience == 1.0);
    for (double x : get_series(r, "resilience")) CHECK(x == 1.0);
    for (const auto& rec : r.records) {
        CHECK(rec.fdi_attack == 0);
        CHECK(rec.measurement_error == 0.0);
    }
}

TEST_CASE("disturbances lower resilience") {
    auto c = short_run(200);
    c.attacks.windows = {{20, 200}};
    c.fdi.p_fdi = 1.0;
    const auto r = run_scenario(c);
    const auto& res = get_series(r, "resilience");
    CHECK(*std::min_element(res.begin(), res.end()) < 1.0);
    for (double x : res) CHECK(x <= 1.0);
}

TEST_CASE("fixed seed is deterministic") {
    const auto a = run_scenario(short_run(30, 7));
    const auto b = run_scenario(short_run(30, 7));
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i] == b.records[i]);
    CHECK(a.series == b.series);

    const auto c = run_scenario(short_run(30, 8));
    bool differ = false;
    for (std::size_t i = 0; i < a.records.size() && !differ; ++i) differ = !(a.records[i] == c.records[i]);
    CHECK(differ);
}

TEST_CASE("controller subset leaves other columns empty") {
    auto c = short_run(30);
    c.controllers = parse_controllers("adp");
    const auto r = run_scenario(c);
    for (double x : get_series(r, "cost_ppo")) CHECK(x == 0.0);
    for (double x : get_series(r, "cost_dqn")) CHECK(x == 0.0);
    const auto& total = get_series(r, "cost_total");
    const auto& adp = get_series(r, "cost_adp");
    for (long k = 0; k < c.steps; ++k) CHECK(total[k] == adp[k]);
    for (const auto& rec : r.records) {
        CHECK(rec.ppo_action == 0);
        CHECK(rec.ppo_reward == 0.0);
        CHECK(rec.dqn_q_value == 0.0);
        CHECK(rec.dqn_action == 0);
    }

    c.controllers = parse_controllers("dqn");
    c.hybrid = false;
    const auto d = run_scenario(c);
    for (const auto& rec : d.records) {
        CHECK(rec.adp_value == 0.0);
        CHECK(rec.adp_action == 0.0);
    }
}

TEST_CASE("power flow only mode") {
    auto c = short_run(20);
    c.enable_dynamics = false;
    const auto r = run_scenario(c);
    CHECK(r.records.size() == 20u * 33u);
    for (const auto& rec : r.records) CHECK(rec.frequency == 50.0);
}

namespace {

// A feeder with stretched lines and no local generation: solvable at the
// night-time load, not at the evening peak.
ScenarioConfig weak_feeder_run() {
    auto doc = grid::read_json_file(std::string(GRIDSIM_DATA_DIR) + "/ieee33.json");
    for (auto& line : doc.at("lines")) {
        line["r_ohm"] = line["r_ohm"].get<double>() * 4.0;
        line["x_ohm"] = line["x_ohm"].get<double>() * 4.0;
    }
    const auto path = temp_path("weak_feeder.json");
    std::ofstream(path) << doc.dump();
    auto c = short_run(24);
    c.network_file = path;
    c.enable_dynamics = false;
    c.day_length_steps = 24;
    c.start_hour = 3.0;
    c.devices.solar.buses.clear();
    c.devices.wind.buses.clear();
    c.devices.ev.buses.clear();
    c.devices.battery.all = false;
    c.devices.battery.buses.clear();
    return c;
}

}  // namespace

TEST_CASE("diverged steps are marked and the run continues") {
    auto c = weak_feeder_run();
    c.max_diverged_fraction = 1.0;
    const auto r = run_scenario(c);
    CHECK_FALSE(r.diverged_steps.empty());
    CHECK(r.diverged_steps.front() > 0);
    CHECK(r.records.size() == 24u * 33u);
    for (long k : r.diverged_steps) CHECK(r.log[static_cast<std::size_t>(k)].diverged);
    CHECK_FALSE(r.log.front().diverged);
}

TEST_CASE("too many diverged steps fail the run") {
    const auto c = weak_feeder_run();
    try {
        run_scenario(c);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("network solve failed") != std::string::npos);
    }

    auto worse = c;
    auto doc = grid::read_json_file(c.network_file);
    for (auto& line : doc.at("lines")) line["r_ohm"] = line["r_ohm"].get<double>() * 3.0;
    std::ofstream(c.network_file) << doc.dump();
    CHECK_THROWS_AS(run_scenario(worse), DivergenceError);
    std::filesystem::remove(c.network_file);
}

TEST_CASE("series export") {
    const auto r = run_scenario(short_run(25));
    try {
        get_series(r, "voltage_bus7");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        for (const auto& n : series_names()) CHECK(msg.find(n) != std::string::npos);
    }

    const auto path = temp_path("const_series.csv");
    write_series_csv(std::vector<double>(10, 2.5), 4, path);
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,value,moving_average");
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(line == std::to_string(rows) + ",2.5,2.5");
        ++rows;
    }
    CHECK(rows == 10);

    export_series(r, "bus5_voltage", path);
    std::istringstream in2(slurp(path));
    std::getline(in2, line);
    const auto& v = get_series(r, "bus5_voltage");
    for (std::size_t k = 0; k < v.size(); ++k) {
        REQUIRE(std::getline(in2, line));
        const auto f = detail::split_commas(line);
        CHECK(detail::parse_double(f[1], k) == round6(v[k]));
    }

    const auto table = temp_path("series.csv");
    write_series_table(r, table);
    const auto back = read_series_table(table);
    CHECK(back.size() == series_names().size());
    for (const auto& n : series_names()) {
        REQUIRE(back.at(n).size() == 25);
        for (std::size_t k = 0; k < 25; ++k) CHECK(back.at(n)[k] == round6(r.series.at(n)[k]));
    }
    std::filesystem::remove(path);
    std::filesystem::remove(table);
}
