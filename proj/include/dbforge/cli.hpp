#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dbforge::cli {

// Exit codes shared by every subcommand: 0 success, 2 config/usage,
// 3 I/O, 4 pipeline failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitPipeline = 4;

int cmd_gen(const std::string& config_path, const std::string& out_dir);
int cmd_run(const std::string& config_path, const std::optional<std::string>& out_dir,
            std::optional<int> jobs, std::optional<std::uint64_t> seed_override);
int cmd_weights(const std::string& modes_csv, const std::string& out_csv,
                const std::string& diagnostics_json);
int cmd_sweep(const std::string& config_path, const std::string& parameter,
              const std::vector<std::string>& values, const std::optional<std::string>& out_dir,
              std::optional<int> jobs);
int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::optional<std::string>& train_data_path,
             const std::optional<std::string>& out_json);
int cmd_mi(const std::string& joint_csv);

// Full argv dispatcher used by the binary.
int run_main(int argc, const char* const* argv);

} // namespace dbforge::cli
