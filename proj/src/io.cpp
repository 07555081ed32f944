#include "stochmanifold/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "stochmanifold/error.hpp"

namespace stochmanifold {

std::string format_double(double x) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()) {
    if (header.empty()) {
        throw InvalidArgument("CsvTable: empty header");
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        text_ += (i ? "," : "") + header[i];
    }
    text_ += '\n';
}

void CsvTable::add_row(const std::vector<double>& row) {
    if (row.size() != columns_) {
        throw InvalidArgument("CsvTable: row width does not match header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) {
            text_ += ',';
        }
        text_ += format_double(row[i]);
    }
    text_ += '\n';
    ++rows_;
}

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw NumericalFailure("sha256_hex: digest failed", 0.0);
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) {
        out << std::setw(2) << static_cast<int>(md[i]);
    }
    return out.str();
}

void write_text(const std::filesystem::path& file, const std::string& content) {
    if (file.has_parent_path()) {
        std::filesystem::create_directories(file.parent_path());
    }
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) {
        throw InvalidArgument("write_text: cannot write " + file.string());
    }
}

std::string read_text(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw InvalidArgument("read_text: cannot open " + file.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CsvTable trajectory_csv(const Trajectory& traj) {
    if (traj.states.empty()) {
        throw InvalidArgument("trajectory_csv: empty trajectory");
    }
    const auto n = traj.states.front().size();
    std::vector<std::string> header{"t"};
    for (Eigen::Index i = 0; i < n; ++i) {
        header.push_back("c_" + std::to_string(i + 1));
    }
    CsvTable table(std::move(header));
    std::vector<double> row(static_cast<std::size_t>(n) + 1);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        row[0] = traj.time(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            row[static_cast<std::size_t>(i) + 1] = traj.states[k](i);
        }
        table.add_row(row);
    }
    return table;
}

nlohmann::json trajectory_sidecar(const Trajectory& traj, const SpectralModel& model) {
    return {{"scheme_id", traj.scheme_id},
            {"dt", traj.dt},
            {"model_hash", model.model_hash()},
            {"seed", traj.seed}};
}

CsvTable path_csv(const WienerPath& path, const OUProcess& ou) {
    CsvTable table({"t", "W", "z", "Z"});
    for (std::int64_t k = ou.k_min(); k <= ou.k_max(); ++k) {
        table.add_row({static_cast<double>(k) * ou.dt(), path.value(k), ou.z(k), ou.Z(k)});
    }
    return table;
}

nlohmann::json path_sidecar(const WienerPath& path, const OUProcess& ou) {
    return {{"seed", path.seed()},
            {"generator_id", path.generator_id()},
            {"dt", path.dt()},
            {"t_min", path.t_min()},
            {"t_max", path.t_max()},
            {"burn_in", ou.burn_in()}};
}

} // namespace stochmanifold
