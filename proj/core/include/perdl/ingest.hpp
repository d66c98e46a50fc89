#pragma once

#include "perdl/synthgen.hpp"
#include "perdl/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace perdl {

/// Binary matrix container: magic "PDLM", u32 version (currently 1), u64
/// rows, u64 cols, then row-major little-endian f64 payload. Unknown
/// versions are rejected, never misread.
void write_matrix_binary(const Eigen::MatrixXd& m, const std::string& path);

/// CSV alternative: first line "<rows>,<cols>", then one comma-separated
/// line per row at full precision.
void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path);

/// Reads either container, sniffing the magic bytes. Errors carry the byte
/// offset (binary) or line number (CSV) of the problem.
Eigen::MatrixXd read_matrix(const std::string& path);

/// Patch extraction parameters. stride_cols <= 0 reuses stride_rows.
/// Grayscale averages channels into one plane; Stack concatenates the
/// per-channel patch blocks into one column.
struct PatchConfig {
  int patch_rows = 12;
  int patch_cols = 16;
  int stride_rows = 12;
  int stride_cols = 16;
  enum class ChannelMode { kGrayscale, kStack };
  ChannelMode channel_mode = ChannelMode::kStack;

  void validate() const;
  int column_dim(int channels) const;
};

/// One image as equally-sized channel planes.
struct Frame {
  std::vector<Eigen::MatrixXd> channels;

  int rows() const { return channels.empty() ? 0 : static_cast<int>(channels.front().rows()); }
  int cols() const { return channels.empty() ? 0 : static_cast<int>(channels.front().cols()); }
  int num_channels() const { return static_cast<int>(channels.size()); }

  void validate() const;
};

/// Vectorizes every patch into a column (row-major within the patch,
/// channels stacked last); one data matrix per frame. Patch origins walk
/// the grid row-major at the configured strides.
std::vector<Eigen::MatrixXd> frames_to_patches(const std::vector<Frame>& frames,
                                               const PatchConfig& cfg);

/// Inverse of the patch pipeline: exact for non-overlapping patches,
/// averaged where patches overlap, zero where nothing lands.
std::vector<Frame> patches_to_frames(const std::vector<Eigen::MatrixXd>& mats,
                                     const PatchConfig& cfg, int rows, int cols,
                                     int channels);

struct ClientDataset {
  Eigen::MatrixXd data;
  std::vector<int> labels;
};

/// Samples `per_client_count` columns from a labeled pool:
/// floor(majority_fraction * count) from the majority label, the remainder
/// spread over the other labels (ascending label order, earlier labels get
/// the leftovers). Sampling within a label is seeded and without
/// replacement.
ClientDataset build_imbalanced_split(const Eigen::MatrixXd& pool,
                                     const std::vector<int>& labels,
                                     int majority_label,
                                     double majority_fraction,
                                     int per_client_count, std::uint64_t seed);

/// Ground-truth serialization: one matrix file per piece under `dir`
/// (global.pdlm, local_<i>.pdlm, codes_<i>.pdlm, data_<i>.pdlm).
void save_ground_truth(const GroundTruth& gt, const std::string& dir);
GroundTruth load_ground_truth(const std::string& dir, int num_clients);

}  // namespace perdl
