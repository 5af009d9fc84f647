#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gridsim/core/errors.hpp"

namespace gridsim::sim {

inline constexpr std::array<const char*, 28> record_columns{
    "Timestamp",        "BusID",           "Voltage(pu)",       "Angle(rad)",          "LoadP(kW)",
    "LoadQ(kVAR)",      "SolarGen(kW)",    "WindGen(kW)",       "BatterySOC(%)",       "EVLoad(kW)",
    "Frequency(Hz)",    "FeederPower(kW)", "CommunicationDelay(ms)", "PacketLossRate", "FDI_Attack",
    "FDI_Severity",     "MeasurementError", "ADP_ValueFunction", "ADP_ControlAction",  "PPO_Action",
    "PPO_Reward",       "DQN_QValue",      "DQN_Action",        "ResilienceIndex",     "Edge_EstimatedState",
    "Cloud_OptimizedState", "Edge_ControlAction", "Cloud_UpdateFlag"};

inline std::string record_header() {
    std::string h;
    for (std::size_t i = 0; i < record_columns.size(); ++i) {
        if (i) h += ',';
        h += record_columns[i];
    }
    return h;
}

// One row per (step, bus). Values are stored already rounded to what the CSV
// carries, so a written file parses back to identical records.
struct StepRecord {
    std::string timestamp;
    int bus_id = 0;
    double voltage = 0.0;
    double angle = 0.0;
    double load_p = 0.0;
    double load_q = 0.0;
    double solar = 0.0;
    double wind = 0.0;
    double battery_soc_pct = 0.0;
    double ev_load = 0.0;
    double frequency = 0.0;
    double feeder_power = 0.0;
    double comm_delay_ms = 0.0;
    double packet_loss_rate = 0.0;
    int fdi_attack = 0;
    double fdi_severity = 0.0;
    double measurement_error = 0.0;
    double adp_value = 0.0;
    double adp_action = 0.0;
    int ppo_action = 0;
    double ppo_reward = 0.0;
    double dqn_q_value = 0.0;
    int dqn_action = 0;
    double resilience = 0.0;
    double edge_v = 0.0;
    double edge_a = 0.0;
    double cloud_v = 0.0;
    double cloud_a = 0.0;
    double edge_control_action = 0.0;
    int cloud_update_flag = 0;

    bool operator==(const StepRecord&) const = default;
};

inline std::string format_g6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// Rounds to six significant digits, the precision of the CSV.
inline double round6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    const double y = std::strtod(buf, nullptr);
    return y == 0.0 ? 0.0 : y;  // no negative zero
}

inline double round_fixed3(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    const double y = std::strtod(buf, nullptr);
    return y == 0.0 ? 0.0 : y;
}

inline std::string state_cell(double v, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "V=%.3f;A=%.3f", v, a);
    return buf;
}

// Wall-clock label of a step: the day is compressed onto `day_length_steps`
// steps starting 11/1/2025 at `start_hour`. Seconds are truncated.
inline std::string step_timestamp(long step, int day_length_steps, double start_hour = 0.0) {
    using namespace std::chrono;
    const double secs = start_hour * 3600.0 + 86400.0 * static_cast<double>(step) / day_length_steps;
    const auto total = static_cast<long long>(std::floor(secs + 1e-9));
    const long long day = total / 86400, rem = total % 86400;
    const year_month_day d{sys_days{year{2025} / November / 1} + days{day}};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%u/%u/%d %lld:%02lld:%02lld", static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()), static_cast<int>(d.year()), rem / 3600, (rem / 60) % 60, rem % 60);
    return buf;
}

inline std::string to_csv_row(const StepRecord& r) {
    std::string s;
    s.reserve(320);
    auto num = [&](double x) {
        s += format_g6(x);
        s += ',';
    };
    auto integer = [&](int x) {
        s += std::to_string(x);
        s += ',';
    };
    s += r.timestamp;
    s += ',';
    integer(r.bus_id);
    for (double x : {r.voltage, r.angle, r.load_p, r.load_q, r.solar, r.wind, r.battery_soc_pct, r.ev_load,
                     r.frequency, r.feeder_power, r.comm_delay_ms, r.packet_loss_rate})
        num(x);
    integer(r.fdi_attack);
    for (double x : {r.fdi_severity, r.measurement_error, r.adp_value, r.adp_action}) num(x);
    integer(r.ppo_action);
    num(r.ppo_reward);
    num(r.dqn_q_value);
    integer(r.dqn_action);
    num(r.resilience);
    s += state_cell(r.edge_v, r.edge_a);
    s += ',';
    s += state_cell(r.cloud_v, r.cloud_a);
    s += ',';
    num(r.edge_control_action);
    s += std::to_string(r.cloud_update_flag);
    return s;
}

inline void write_records(const std::vector<StepRecord>& records, const std::string& path) {
    if (records.empty()) throw DomainError("write_records: no records");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write records file: " + path);
    out << record_header() << '\n';
    for (const auto& r : records) out << to_csv_row(r) << '\n';
    if (!out) throw IoError("failed while writing records file: " + path);
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t line) {
    const std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size())
        throw ConfigError("records line " + std::to_string(line) + ": bad number '" + tmp + "'");
    return v;
}

inline int parse_int(std::string_view s, std::size_t line) {
    const double v = parse_double(s, line);
    if (v != std::floor(v)) throw ConfigError("records line " + std::to_string(line) + ": expected an integer");
    return static_cast<int>(v);
}

inline std::pair<double, double> parse_state_cell(std::string_view s, std::size_t line) {
    const auto semi = s.find(';');
    if (s.substr(0, 2) != "V=" || semi == std::string_view::npos || s.substr(semi + 1, 2) != "A=")
        throw ConfigError("records line " + std::to_string(line) + ": bad state cell");
    return {parse_double(s.substr(2, semi - 2), line), parse_double(s.substr(semi + 3), line)};
}

}  // namespace detail

inline StepRecord parse_csv_row(const std::string& line, std::size_t line_no = 0) {
    auto f = detail::split_commas(line);
    if (f.size() != record_columns.size())
        throw ConfigError("records line " + std::to_string(line_no) + ": expected 28 fields, got " +
                          std::to_string(f.size()));
    using detail::parse_double;
    using detail::parse_int;
    StepRecord r;
    std::size_t i = 0;
    auto d = [&] { return parse_double(f[i++], line_no); };
    auto n = [&] { return parse_int(f[i++], line_no); };
    r.timestamp = std::string(f[i++]);
    r.bus_id = n();
    r.voltage = d();
    r.angle = d();
    r.load_p = d();
    r.load_q = d();
    r.solar = d();
    r.wind = d();
    r.battery_soc_pct = d();
    r.ev_load = d();
    r.frequency = d();
    r.feeder_power = d();
    r.comm_delay_ms = d();
    r.packet_loss_rate = d();
    r.fdi_attack = n();
    r.fdi_severity = d();
    r.measurement_error = d();
    r.adp_value = d();
    r.adp_action = d();
    r.ppo_action = n();
    r.ppo_reward = d();
    r.dqn_q_value = d();
    r.dqn_action = n();
    r.resilience = d();
    std::tie(r.edge_v, r.edge_a) = detail::parse_state_cell(f[i++], line_no);
    std::tie(r.cloud_v, r.cloud_a) = detail::parse_state_cell(f[i++], line_no);
    r.edge_control_action = d();
    r.cloud_update_flag = n();
    return r;
}

inline std::vector<StepRecord> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open records file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != record_header())
        throw ConfigError("records file " + path + ": header does not match the record schema");
    std::vector<StepRecord> out;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        out.push_back(parse_csv_row(line, n));
    }
    return out;
}

}  // namespace gridsim::sim
