#include "perdl/ingest.hpp"

#include "perdl/rng.hpp"
#include "perdl/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace perdl {

namespace {

constexpr char kMagic[4] = {'P', 'D', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

bool get_bytes(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint32_t decode_u32(const unsigned char* b) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t decode_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

Eigen::MatrixXd read_matrix_binary(std::istream& in, const std::string& path) {
  unsigned char header[4 + 4 + 8 + 8];
  if (!get_bytes(in, header, sizeof(header))) {
    throw std::runtime_error(path + ": truncated header (expected " +
                             std::to_string(sizeof(header)) + " bytes)");
  }
  if (std::memcmp(header, kMagic, 4) != 0) {
    throw std::runtime_error(path + ": bad magic at offset 0");
  }
  const std::uint32_t version = decode_u32(header + 4);
  if (version != kVersion) {
    throw std::runtime_error(path + ": unsupported version " +
                             std::to_string(version) + " at offset 4");
  }
  const std::uint64_t rows = decode_u64(header + 8);
  const std::uint64_t cols = decode_u64(header + 16);
  if (rows == 0 || cols == 0 || rows > (1ULL << 32) || cols > (1ULL << 32)) {
    throw std::runtime_error(path + ": implausible dimensions " +
                             std::to_string(rows) + "x" + std::to_string(cols));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::uint64_t offset = sizeof(header);
  unsigned char buf[8];
  for (std::uint64_t i = 0; i < rows; ++i) {
    for (std::uint64_t j = 0; j < cols; ++j) {
      if (!get_bytes(in, buf, 8)) {
        throw std::runtime_error(
            path + ": truncated payload at offset " + std::to_string(offset) +
            " (expected " + std::to_string(rows * cols * 8) + " payload bytes)");
      }
      std::uint64_t bits = decode_u64(buf);
      double v;
      std::memcpy(&v, &bits, 8);
      if (!std::isfinite(v)) {
        throw std::runtime_error(path + ": non-finite entry at offset " +
                                 std::to_string(offset));
      }
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      offset += 8;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(path + ": trailing bytes after payload at offset " +
                             std::to_string(offset));
  }
  return m;
}

Eigen::MatrixXd read_matrix_csv(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": empty file (line 1)");
  }
  long rows = 0, cols = 0;
  {
    std::istringstream header(line);
    char comma = 0;
    if (!(header >> rows >> comma >> cols) || comma != ',' || rows < 1 || cols < 1) {
      throw std::runtime_error(path + ": malformed header on line 1, expected \"rows,cols\"");
    }
  }
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error(path + ": missing data row on line " +
                               std::to_string(i + 2));
    }
    std::istringstream row(line);
    std::string cell;
    for (long j = 0; j < cols; ++j) {
      if (!std::getline(row, cell, ',')) {
        throw std::runtime_error(path + ": too few columns on line " +
                                 std::to_string(i + 2));
      }
      try {
        m(i, j) = std::stod(cell);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ": unparseable value on line " +
                                 std::to_string(i + 2));
      }
      if (!std::isfinite(m(i, j))) {
        throw std::runtime_error(path + ": non-finite entry on line " +
                                 std::to_string(i + 2));
      }
    }
    if (std::getline(row, cell, ',')) {
      throw std::runtime_error(path + ": too many columns on line " +
                               std::to_string(i + 2));
    }
  }
  return m;
}

}  // namespace

void write_matrix_binary(const Eigen::MatrixXd& m, const std::string& path) {
  detail::require_finite(m, "write_matrix_binary");
  if (m.rows() < 1 || m.cols() < 1) {
    throw std::invalid_argument("write_matrix_binary: empty matrix");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      put_f64(out, m(i, j));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  detail::require_finite(m, "write_matrix_csv");
  if (m.rows() < 1 || m.cols() < 1) {
    throw std::invalid_argument("write_matrix_csv: empty matrix");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << m.rows() << ',' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  const bool has_magic =
      in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0;
  in.clear();
  in.seekg(0);
  if (has_magic) {
    return read_matrix_binary(in, path);
  }
  return read_matrix_csv(in, path);
}

void PatchConfig::validate() const {
  if (patch_rows < 1 || patch_cols < 1) {
    throw std::invalid_argument("PatchConfig: patch dims >= 1 required");
  }
  if (stride_rows < 1) throw std::invalid_argument("PatchConfig: stride >= 1 required");
  if (stride_cols < 0) throw std::invalid_argument("PatchConfig: stride_cols >= 0 required");
}

int PatchConfig::column_dim(int channels) const {
  return patch_rows * patch_cols *
         (channel_mode == ChannelMode::kStack ? channels : 1);
}

void Frame::validate() const {
  if (channels.empty()) throw std::invalid_argument("Frame: no channels");
  for (const auto& c : channels) {
    if (c.rows() != channels.front().rows() || c.cols() != channels.front().cols()) {
      throw std::invalid_argument("Frame: channel dimensions differ");
    }
  }
}

std::vector<Eigen::MatrixXd> frames_to_patches(const std::vector<Frame>& frames,
                                               const PatchConfig& cfg) {
  cfg.validate();
  if (frames.empty()) return {};
  frames.front().validate();
  const int rows = frames.front().rows();
  const int cols = frames.front().cols();
  const int channels = frames.front().num_channels();
  const int stride_c = cfg.stride_cols > 0 ? cfg.stride_cols : cfg.stride_rows;
  if (cfg.patch_rows > rows || cfg.patch_cols > cols) {
    throw std::invalid_argument("frames_to_patches: frame smaller than patch");
  }

  std::vector<std::pair<int, int>> origins;
  for (int r0 = 0; r0 + cfg.patch_rows <= rows; r0 += cfg.stride_rows) {
    for (int c0 = 0; c0 + cfg.patch_cols <= cols; c0 += stride_c) {
      origins.emplace_back(r0, c0);
    }
  }
  const int dim = cfg.column_dim(channels);
  const bool gray = cfg.channel_mode == PatchConfig::ChannelMode::kGrayscale;

  std::vector<Eigen::MatrixXd> out;
  out.reserve(frames.size());
  for (const auto& frame : frames) {
    frame.validate();
    if (frame.rows() != rows || frame.cols() != cols || frame.num_channels() != channels) {
      throw std::invalid_argument("frames_to_patches: frames differ in shape");
    }
    Eigen::MatrixXd mat(dim, static_cast<Eigen::Index>(origins.size()));
    for (std::size_t p = 0; p < origins.size(); ++p) {
      auto [r0, c0] = origins[p];
      Eigen::Index row = 0;
      if (gray) {
        for (int pr = 0; pr < cfg.patch_rows; ++pr) {
          for (int pc = 0; pc < cfg.patch_cols; ++pc) {
            double sum = 0.0;
            for (const auto& plane : frame.channels) sum += plane(r0 + pr, c0 + pc);
            mat(row++, static_cast<Eigen::Index>(p)) = sum / channels;
          }
        }
      } else {
        for (const auto& plane : frame.channels) {
          for (int pr = 0; pr < cfg.patch_rows; ++pr) {
            for (int pc = 0; pc < cfg.patch_cols; ++pc) {
              mat(row++, static_cast<Eigen::Index>(p)) = plane(r0 + pr, c0 + pc);
            }
          }
        }
      }
    }
    out.push_back(std::move(mat));
  }
  return out;
}

std::vector<Frame> patches_to_frames(const std::vector<Eigen::MatrixXd>& mats,
                                     const PatchConfig& cfg, int rows, int cols,
                                     int channels) {
  cfg.validate();
  if (channels < 1) throw std::invalid_argument("patches_to_frames: channels >= 1 required");
  const bool gray = cfg.channel_mode == PatchConfig::ChannelMode::kGrayscale;
  const int effective_channels = gray ? 1 : channels;
  const int stride_c = cfg.stride_cols > 0 ? cfg.stride_cols : cfg.stride_rows;

  std::vector<std::pair<int, int>> origins;
  for (int r0 = 0; r0 + cfg.patch_rows <= rows; r0 += cfg.stride_rows) {
    for (int c0 = 0; c0 + cfg.patch_cols <= cols; c0 += stride_c) {
      origins.emplace_back(r0, c0);
    }
  }
  const int dim = cfg.patch_rows * cfg.patch_cols * effective_channels;

  std::vector<Frame> out;
  out.reserve(mats.size());
  for (const auto& mat : mats) {
    if (mat.rows() != dim || mat.cols() != static_cast<Eigen::Index>(origins.size())) {
      throw std::invalid_argument(
          "patches_to_frames: matrix shape inconsistent with patch grid (expected " +
          std::to_string(dim) + "x" + std::to_string(origins.size()) + ")");
    }
    Frame frame;
    frame.channels.assign(static_cast<std::size_t>(effective_channels),
                          Eigen::MatrixXd::Zero(rows, cols));
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(rows, cols);
    for (std::size_t p = 0; p < origins.size(); ++p) {
      auto [r0, c0] = origins[p];
      Eigen::Index row = 0;
      for (int ch = 0; ch < effective_channels; ++ch) {
        for (int pr = 0; pr < cfg.patch_rows; ++pr) {
          for (int pc = 0; pc < cfg.patch_cols; ++pc) {
            frame.channels[static_cast<std::size_t>(ch)](r0 + pr, c0 + pc) +=
                mat(row++, static_cast<Eigen::Index>(p));
          }
        }
      }
      counts.block(r0, c0, cfg.patch_rows, cfg.patch_cols).array() += 1.0;
    }
    for (auto& plane : frame.channels) {
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          if (counts(i, j) > 0.0) plane(i, j) /= counts(i, j);
        }
      }
    }
    out.push_back(std::move(frame));
  }
  return out;
}

ClientDataset build_imbalanced_split(const Eigen::MatrixXd& pool,
                                     const std::vector<int>& labels,
                                     int majority_label,
                                     double majority_fraction,
                                     int per_client_count, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(labels.size()) != pool.cols()) {
    throw std::invalid_argument("build_imbalanced_split: one label per pool column required");
  }
  if (majority_fraction < 0.0 || majority_fraction > 1.0) {
    throw std::invalid_argument("build_imbalanced_split: fraction must be in [0, 1]");
  }
  if (per_client_count < 1) {
    throw std::invalid_argument("build_imbalanced_split: per_client_count >= 1 required");
  }

  std::map<int, std::vector<int>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_label[labels[i]].push_back(static_cast<int>(i));
  }
  if (by_label.find(majority_label) == by_label.end()) {
    throw std::invalid_argument("build_imbalanced_split: majority label " +
                                std::to_string(majority_label) + " absent from pool");
  }

  const int majority_count =
      static_cast<int>(std::floor(majority_fraction * per_client_count));
  const int minority_count = per_client_count - majority_count;

  std::vector<int> other_labels;
  for (const auto& [label, _] : by_label) {
    if (label != majority_label) other_labels.push_back(label);
  }
  if (minority_count > 0 && other_labels.empty()) {
    throw std::invalid_argument("build_imbalanced_split: no minority labels available");
  }

  // Exact quota per label; earlier labels absorb the remainder.
  std::map<int, int> quota;
  quota[majority_label] = majority_count;
  if (minority_count > 0) {
    const int base = minority_count / static_cast<int>(other_labels.size());
    const int extra = minority_count % static_cast<int>(other_labels.size());
    for (std::size_t idx = 0; idx < other_labels.size(); ++idx) {
      quota[other_labels[idx]] = base + (static_cast<int>(idx) < extra ? 1 : 0);
    }
  }

  std::string deficits;
  for (const auto& [label, need] : quota) {
    const int have = static_cast<int>(by_label[label].size());
    if (need > have) {
      deficits += (deficits.empty() ? "" : "; ") + std::string("label ") +
                  std::to_string(label) + ": need " + std::to_string(need) +
                  ", have " + std::to_string(have);
    }
  }
  if (!deficits.empty()) {
    throw std::invalid_argument("build_imbalanced_split: insufficient pool (" +
                                deficits + ")");
  }

  SplitMix64 rng(seed);
  ClientDataset out;
  out.data.resize(pool.rows(), per_client_count);
  out.labels.reserve(static_cast<std::size_t>(per_client_count));
  Eigen::Index cursor = 0;
  auto take = [&](int label, int need) {
    auto& candidates = by_label[label];
    // Partial Fisher-Yates: the first `need` slots become the sample.
    for (int k = 0; k < need; ++k) {
      int j = k + rng.next_int(static_cast<int>(candidates.size()) - k);
      std::swap(candidates[static_cast<std::size_t>(k)], candidates[static_cast<std::size_t>(j)]);
      out.data.col(cursor++) = pool.col(candidates[static_cast<std::size_t>(k)]);
      out.labels.push_back(label);
    }
  };
  take(majority_label, majority_count);
  for (int label : other_labels) {
    auto it = quota.find(label);
    if (it != quota.end() && it->second > 0) take(label, it->second);
  }
  return out;
}

void save_ground_truth(const GroundTruth& gt, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto at = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  if (gt.global_dict.num_atoms() > 0) {
    write_matrix_binary(gt.global_dict.atoms(), at("global.pdlm"));
  }
  for (int i = 0; i < gt.num_clients(); ++i) {
    const auto tag = std::to_string(i);
    if (gt.local_dicts[static_cast<std::size_t>(i)].num_atoms() > 0) {
      write_matrix_binary(gt.local_dicts[static_cast<std::size_t>(i)].atoms(),
                          at("local_" + tag + ".pdlm"));
    }
    write_matrix_binary(gt.codes[static_cast<std::size_t>(i)].values(),
                        at("codes_" + tag + ".pdlm"));
    write_matrix_binary(gt.data[static_cast<std::size_t>(i)], at("data_" + tag + ".pdlm"));
  }
}

GroundTruth load_ground_truth(const std::string& dir, int num_clients) {
  namespace fs = std::filesystem;
  auto at = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  GroundTruth gt;
  const auto global_path = at("global.pdlm");
  if (fs::exists(global_path)) {
    gt.global_dict = Dictionary(read_matrix(global_path), true);
  } else if (num_clients > 0) {
    const auto probe = read_matrix(at("data_0.pdlm"));
    gt.global_dict = Dictionary::empty(static_cast<int>(probe.rows()));
  }
  for (int i = 0; i < num_clients; ++i) {
    const auto tag = std::to_string(i);
    const auto local_path = at("local_" + tag + ".pdlm");
    if (fs::exists(local_path)) {
      gt.local_dicts.emplace_back(read_matrix(local_path), true);
    } else {
      gt.local_dicts.push_back(Dictionary::empty(gt.global_dict.dim()));
    }
    gt.codes.emplace_back(read_matrix(at("codes_" + tag + ".pdlm")));
    gt.data.push_back(read_matrix(at("data_" + tag + ".pdlm")));
  }
  return gt;
}

}  // namespace perdl
