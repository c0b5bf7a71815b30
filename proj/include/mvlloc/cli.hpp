#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvlloc/fixtures.hpp"
#include "mvlloc/model.hpp"
#include "mvlloc/report.hpp"
#include "mvlloc/run_config.hpp"

namespace mvl {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitRuntime = 2,
  kExitDivergence = 3,
};

/// Generates the synthetic dataset at config.dataset_path() and returns its
/// digest.
std::string cmd_gen_data(const RunConfig& config, std::ostream& out);

/// Trains on the dataset at config.dataset_path(), writing loss.log and
/// checkpoints into config.output.
void cmd_train(const RunConfig& config, std::ostream& out);

struct EvalOptions {
  std::filesystem::path checkpoint;
  /// Defaults to config.dataset_path().
  std::optional<std::filesystem::path> dataset;
  /// Defaults to <output>/report.txt.
  std::optional<std::filesystem::path> report;
  /// Score the ground truth against itself instead of running the model.
  bool echo_ground_truth = false;
};

MetricsReport cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& out);

Comparison cmd_compare(const std::filesystem::path& report, const std::string& fixture, const std::string& method,
                       std::ostream& out);

/// Per decoder layer and MHA head: the mean over all query rows of the
/// weights on visual keys, laid out on the patch grid.
std::vector<Tensor> attention_maps(const LayerAttention& layer, std::size_t grid_rows, std::size_t grid_cols);

/// 8-bit binary PGM of `map` min-max normalized to [0, 255] (a constant map
/// becomes all zeros), each cell repeated `scale` x `scale` times.
std::string encode_pgm(const Tensor& map, std::size_t scale = 1);

/// Writes layer<L>_head<H>.pgm for one dataset sample and returns the paths.
std::vector<std::filesystem::path> cmd_export_attention(const std::filesystem::path& checkpoint,
                                                        const std::filesystem::path& dataset, std::size_t sample,
                                                        const std::filesystem::path& out_dir, std::ostream& out);

/// Full command line entry point; returns an ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mvl
