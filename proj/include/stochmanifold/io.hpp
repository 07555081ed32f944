#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochmanifold/flow.hpp"
#include "stochmanifold/model.hpp"
#include "stochmanifold/noise.hpp"

namespace stochmanifold {

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

/// Builds a CSV body in memory; numbers use format_double.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(const std::vector<double>& row);
    std::size_t rows() const noexcept { return rows_; }
    const std::string& text() const noexcept { return text_; }

private:
    std::size_t columns_;
    std::size_t rows_ = 0;
    std::string text_;
};

std::string sha256_hex(const std::string& bytes);

void write_text(const std::filesystem::path& file, const std::string& content);
std::string read_text(const std::filesystem::path& file);

// Trajectory dump: header t,c_1..c_N; sidecar {scheme_id, dt, model_hash, seed}.
CsvTable trajectory_csv(const Trajectory& traj);
nlohmann::json trajectory_sidecar(const Trajectory& traj, const SpectralModel& model);

// Path dump over the OU window: header t,W,z,Z; sidecar {seed, generator_id, dt, t_min, t_max, burn_in}.
CsvTable path_csv(const WienerPath& path, const OUProcess& ou);
nlohmann::json path_sidecar(const WienerPath& path, const OUProcess& ou);

} // namespace stochmanifold
